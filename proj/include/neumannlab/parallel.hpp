#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace neumannlab {

/// Static round-robin split of [0, count) over `threads` workers. Each
/// index is visited by exactly one worker, so writes to slot i are race-free.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace neumannlab
