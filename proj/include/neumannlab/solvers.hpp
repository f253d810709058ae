#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neumannlab/energy.hpp"
#include "neumannlab/error.hpp"
#include "neumannlab/functional.hpp"
#include "neumannlab/morse.hpp"
#include "neumannlab/parallel.hpp"

namespace neumannlab {

struct SolverConfig {
  double grad_tol = 1e-9;
  int max_iters = 500;
  int path_nodes = 41;
  double dedup_radius = 1e-4;
  int multistart_budget = 500;
  std::uint64_t rng_seed = 7;
  double degeneracy_tol = 1e-7;
  /// Iterates with H^1 norm above this raise DivergingIterates.
  double divergence_radius = std::numeric_limits<double>::infinity();

  // Mountain pass.
  double mp_endpoint_offset = 5.0;
  double mp_bend = 0.5;  // H^1 amplitude of the initial path bend
  double mp_step = 0.2;
  double mp_switch_tol = 1e-3;
  int mp_max_sweeps = 20000;
  int mp_retries = 3;

  // Newton-type refinement.
  double newton_max_step = 2.0;  // H^1 cap on a single Newton step

  int threads = 1;

  void validate() const {
    if (!(grad_tol > 0.0) || !(dedup_radius > 0.0) || !(degeneracy_tol > 0.0) || !(mp_step > 0.0) ||
        !(mp_switch_tol > 0.0) || !(newton_max_step > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "solver tolerances must be positive");
    }
    if (path_nodes < 5) throw Error(ErrorCode::InvalidArgument, "path_nodes must be at least 5");
    if (max_iters < 1 || multistart_budget < 0 || threads < 1) {
      throw Error(ErrorCode::InvalidArgument, "iteration counts must be positive");
    }
  }
};

namespace detail {

/// Scaled coordinates z = D^{1/2} u make the H^1 metric Euclidean; the
/// Hessian becomes the symmetric S = D^{1/2} H D^{-1/2}.
struct ScaledModel {
  Eigen::VectorXd gz;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

template <GradientFunctional F>
ScaledModel scaled_model(const F& j, const Eigen::VectorXd& u, const Eigen::VectorXd& g) {
  const Eigen::VectorXd sq = j.weights().cwiseSqrt();
  Eigen::MatrixXd s = sq.asDiagonal() * j.hessian(u) * sq.cwiseInverse().asDiagonal();
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  return {sq.cwiseProduct(g), es.eigenvalues(), es.eigenvectors()};
}

/// Exact trust-region step (Euclidean, scaled coordinates) from an
/// eigendecomposition: minimize g.p + 1/2 p^T S p subject to |p| <= radius.
inline Eigen::VectorXd trust_region_step(const ScaledModel& m, double radius) {
  const Eigen::VectorXd a = m.eigenvectors.transpose() * m.gz;
  const Eigen::VectorXd& e = m.eigenvalues;
  auto step_norm = [&](double mu) { return (a.array() / (e.array() + mu)).matrix().norm(); };
  auto step = [&](double mu) -> Eigen::VectorXd {
    return -(m.eigenvectors * (a.array() / (e.array() + mu)).matrix());
  };
  const double emin = e.minCoeff();
  if (emin > 0.0 && step_norm(0.0) <= radius) return step(0.0);

  double lo = std::max(0.0, -emin);
  const double floor_eps = 1e-12 * std::max(1.0, std::abs(emin));
  if (step_norm(lo + floor_eps) < radius) {
    // Hard case: move to the boundary along the lowest eigenvector.
    Eigen::VectorXd p = Eigen::VectorXd::Zero(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double d = e[i] + lo;
      if (std::abs(d) > floor_eps) p -= m.eigenvectors.col(i) * (a[i] / d);
    }
    const double rem = radius * radius - p.squaredNorm();
    if (rem > 0.0) p += std::sqrt(rem) * m.eigenvectors.col(0);
    return p;
  }
  double hi = lo + a.norm() / radius + 1.0;
  while (step_norm(hi) > radius) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (step_norm(mid) > radius ? lo : hi) = mid;
  }
  return step(hi);
}

template <GradientFunctional F>
void guard_divergence(const F& j, const Eigen::VectorXd& u, const SolverConfig& cfg) {
  if (!u.allFinite() || metric_norm(j.weights(), u) > cfg.divergence_radius) {
    throw Error(ErrorCode::DivergingIterates, "iterate left the a priori ball");
  }
}

}  // namespace detail

/// Trust-region Newton descent. Energies along accepted iterates are
/// nonincreasing up to round-off at the final residual level.
template <GradientFunctional F>
CriticalPointRecord minimize(const F& j, const Eigen::VectorXd& start, const SolverConfig& cfg,
                             std::string provenance = "minimize", std::vector<double>* energy_trace = nullptr) {
  cfg.validate();
  const Eigen::VectorXd& w = j.weights();
  const Eigen::VectorXd sq_inv = w.cwiseSqrt().cwiseInverse();
  Eigen::VectorXd u = start;
  double e = j.value(u);
  Eigen::VectorXd g = j.gradient(u);
  double res = metric_norm(w, g);
  double radius = 1.0;
  if (energy_trace) energy_trace->push_back(e);
  int it = 0;
  for (; res > cfg.grad_tol; ++it) {
    if (it >= cfg.max_iters) throw Error(ErrorCode::MaxItersExceeded, "minimize did not converge");
    detail::guard_divergence(j, u, cfg);
    const detail::ScaledModel m = detail::scaled_model(j, u, g);
    const Eigen::VectorXd p = detail::trust_region_step(m, radius);
    const Eigen::VectorXd sp = m.eigenvectors.transpose() * p;
    const double pred = -(m.gz.dot(p) + 0.5 * (m.eigenvalues.array() * sp.array().square()).sum());
    const Eigen::VectorXd trial = u + sq_inv.cwiseProduct(p);
    const double e_trial = j.value(trial);
    const double actual = e - e_trial;
    const double noise = 1e-13 * (1.0 + std::abs(e));
    bool accept = false;
    if (pred > noise) {
      const double rho = actual / pred;
      accept = rho > 1e-4;
      if (rho < 0.25) {
        radius *= 0.25;
      } else if (rho > 0.75 && p.norm() > 0.99 * radius) {
        radius = std::min(2.0 * radius, 1e3);
      }
    } else {
      // Model decrease is below round-off: judge by the residual instead.
      const Eigen::VectorXd g_trial = j.gradient(trial);
      accept = metric_norm(w, g_trial) < res && actual > -noise;
      if (!accept) radius *= 0.25;
    }
    if (radius < 1e-14) throw Error(ErrorCode::MaxItersExceeded, "trust region collapsed");
    if (accept) {
      u = trial;
      e = e_trial;
      g = j.gradient(u);
      res = metric_norm(w, g);
      if (energy_trace) energy_trace->push_back(e);
    }
  }
  CriticalPointRecord r = make_record(j, u, Classification::minimizer, std::move(provenance), cfg.degeneracy_tol);
  r.iterations = it;
  if (r.morse_index > 0) {
    r.classification = Classification::other;
    r.warnings.push_back("descent ended at a point with negative Hessian directions");
  }
  return r;
}

/// Newton's method on the gradient (any Morse index) with a
/// Levenberg-Marquardt trust-region fallback on the residual merit.
template <GradientFunctional F>
Eigen::VectorXd newton_refine(const F& j, const Eigen::VectorXd& start, const SolverConfig& cfg, int* iterations = nullptr) {
  cfg.validate();
  const Eigen::VectorXd& w = j.weights();
  const Eigen::VectorXd sq_inv = w.cwiseSqrt().cwiseInverse();
  Eigen::VectorXd u = start;
  Eigen::VectorXd g = j.gradient(u);
  double res = metric_norm(w, g);
  double mu = 1e-3;
  int it = 0;
  for (; res > cfg.grad_tol; ++it) {
    if (it >= cfg.max_iters) throw Error(ErrorCode::MaxItersExceeded, "Newton refinement did not converge");
    detail::guard_divergence(j, u, cfg);
    const detail::ScaledModel m = detail::scaled_model(j, u, g);
    const Eigen::VectorXd a = m.eigenvectors.transpose() * m.gz;
    const Eigen::VectorXd& ev = m.eigenvalues;

    auto try_step = [&](const Eigen::VectorXd& p) -> bool {
      Eigen::VectorXd step = p;
      if (step.norm() > cfg.newton_max_step) step *= cfg.newton_max_step / step.norm();
      const Eigen::VectorXd trial = u + sq_inv.cwiseProduct(step);
      const Eigen::VectorXd g_trial = j.gradient(trial);
      const double r_trial = metric_norm(w, g_trial);
      if (std::isfinite(r_trial) && r_trial < (1.0 - 1e-4) * res) {
        u = trial;
        g = g_trial;
        res = r_trial;
        return true;
      }
      return false;
    };

    bool moved = false;
    if (ev.cwiseAbs().minCoeff() > 1e-12) {
      Eigen::VectorXd p = -(m.eigenvectors * (a.array() / ev.array()).matrix());
      for (int half = 0; half < 6 && !moved; ++half, p *= 0.5) moved = try_step(p);
    }
    // Levenberg-Marquardt on 1/2 |g|^2: (S^2 + mu I) p = -S g.
    for (int tries = 0; tries < 60 && !moved; ++tries) {
      const Eigen::VectorXd p =
          -(m.eigenvectors * (ev.array() * a.array() / (ev.array().square() + mu)).matrix());
      moved = try_step(p);
      if (moved) {
        mu = std::max(1e-12, mu * 0.3);
      } else {
        mu *= 4.0;
      }
    }
    if (!moved) throw Error(ErrorCode::MaxItersExceeded, "Newton refinement stalled");
  }
  if (iterations) *iterations = it;
  return u;
}

template <GradientFunctional F>
CriticalPointRecord refine_to_record(const F& j, const Eigen::VectorXd& start, const SolverConfig& cfg,
                                     std::string provenance) {
  int its = 0;
  const Eigen::VectorXd u = newton_refine(j, start, cfg, &its);
  CriticalPointRecord r = make_record(j, u, Classification::other, std::move(provenance), cfg.degeneracy_tol);
  if (r.morse_index == 0 && !r.degenerate) r.classification = Classification::minimizer;
  r.iterations = its;
  return r;
}

namespace detail {

template <GradientFunctional F>
double path_max_energy(const F& j, const std::vector<Eigen::VectorXd>& path, std::vector<double>& energies) {
  energies.resize(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) energies[i] = j.value(path[i]);
  return *std::max_element(energies.begin(), energies.end());
}

/// Redistribute nodes in [first, last] to equal H^1 arc length, keeping
/// the two end nodes of the segment fixed.
inline void redistribute(std::vector<Eigen::VectorXd>& path, std::size_t first, std::size_t last,
                         const Eigen::VectorXd& w) {
  if (last <= first + 1) return;
  std::vector<double> s(last - first + 1, 0.0);
  for (std::size_t i = first + 1; i <= last; ++i) {
    s[i - first] = s[i - first - 1] + metric_norm(w, path[i] - path[i - 1]);
  }
  const double total = s.back();
  if (!(total > 0.0)) return;
  std::vector<Eigen::VectorXd> old(path.begin() + static_cast<std::ptrdiff_t>(first),
                                   path.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  std::size_t seg = 0;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double target = total * static_cast<double>(i - first) / static_cast<double>(last - first);
    while (seg + 1 < s.size() - 1 && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double t = len > 0.0 ? (target - s[seg]) / len : 0.0;
    path[i] = (1.0 - t) * old[seg] + t * old[seg + 1];
  }
}

}  // namespace detail

/// Mountain-pass saddle between two low-energy anchors by a climbing string:
/// interior nodes descend along the gradient component normal to the path,
/// the highest node climbs along the path tangent, nodes are redistributed
/// by H^1 arc length, and the climbing node is finished by Newton.
template <GradientFunctional F>
CriticalPointRecord mountain_pass(const F& j, const Eigen::VectorXd& end_a, const Eigen::VectorXd& end_b,
                                  const SolverConfig& cfg, std::string provenance = "mountain_pass",
                                  std::optional<Eigen::VectorXd> bend_direction = std::nullopt) {
  cfg.validate();
  const Eigen::VectorXd& w = j.weights();
  const auto n = static_cast<std::size_t>(cfg.path_nodes);
  const double e_a = j.value(end_a);
  const double e_b = j.value(end_b);
  const double endpoint_level = std::max(e_a, e_b);

  Eigen::VectorXd bend = Eigen::VectorXd::Zero(j.size());
  if (bend_direction) {
    bend = *bend_direction;
  } else if (j.size() > 1) {
    bend[1] = 1.0;
  }
  if (metric_norm(w, bend) > 0.0) bend *= cfg.mp_bend / metric_norm(w, bend);

  std::vector<std::string> warnings;
  CriticalPointRecord last;
  for (int attempt = 0; attempt <= cfg.mp_retries; ++attempt) {
    std::vector<Eigen::VectorXd> path(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = static_cast<double>(i) / static_cast<double>(n - 1);
      path[i] = (1.0 - s) * end_a + s * end_b + std::sin(std::numbers::pi * s) * bend;
    }
    std::vector<double> energies;
    std::size_t top = 0;
    int sweep = 0;
    for (;; ++sweep) {
      if (sweep >= cfg.mp_max_sweeps) throw Error(ErrorCode::MaxItersExceeded, "mountain pass did not converge");
      detail::path_max_energy(j, path, energies);
      top = static_cast<std::size_t>(std::max_element(energies.begin(), energies.end()) - energies.begin());
      if (top == 0 || top == n - 1) throw Error(ErrorCode::PathCollapse, "path maximum sits at an endpoint");
      for (std::size_t i = 1; i + 1 < n; ++i) detail::guard_divergence(j, path[i], cfg);

      std::vector<Eigen::VectorXd> grads(n);
      for (std::size_t i = 1; i + 1 < n; ++i) grads[i] = j.gradient(path[i]);
      if (metric_norm(w, grads[top]) <= cfg.mp_switch_tol) break;

      for (std::size_t i = 1; i + 1 < n; ++i) {
        // Nodes already below both endpoints do not affect the minimax level;
        // letting them descend lets the path run off where J is unbounded below.
        if (i != top && energies[i] < endpoint_level) continue;
        Eigen::VectorXd tangent = path[i + 1] - path[i - 1];
        const double tn = metric_norm(w, tangent);
        if (tn > 0.0) tangent /= tn;
        const double along = metric_dot(w, grads[i], tangent);
        const Eigen::VectorXd dir = (i == top) ? Eigen::VectorXd(grads[i] - 2.0 * along * tangent)
                                               : Eigen::VectorXd(grads[i] - along * tangent);
        path[i] -= cfg.mp_step * dir;
      }
      detail::redistribute(path, 0, top, w);
      detail::redistribute(path, top, n - 1, w);
    }

    int its = 0;
    const Eigen::VectorXd saddle = newton_refine(j, path[top], cfg, &its);
    CriticalPointRecord r = make_record(j, saddle, Classification::other, provenance, cfg.degeneracy_tol);
    r.iterations = sweep + its;
    r.warnings = warnings;
    const double d_a = metric_norm(w, saddle - end_a);
    const double d_b = metric_norm(w, saddle - end_b);
    if (d_a <= cfg.dedup_radius || d_b <= cfg.dedup_radius) {
      throw Error(ErrorCode::PathCollapse, "saddle refinement returned an endpoint");
    }
    if (r.energy < endpoint_level - 1e-12) {
      r.warnings.push_back("saddle energy below the endpoint level");
    }
    if (r.morse_index == 1) {
      if (hess_kato_check(r).value_or(false)) r.classification = Classification::mp_type;
      return r;
    }
    last = r;
    if (r.morse_index < 2 || attempt == cfg.mp_retries) break;
    // Higher-index saddle on the path: bend the next path along the
    // unstable direction most transverse to the current path.
    const HessianAnalysis ha = analyze_hessian(j, saddle, cfg.degeneracy_tol);
    Eigen::VectorXd chord = end_b - end_a;
    chord /= std::max(1e-300, metric_norm(w, chord));
    int best = 0;
    double best_transverse = -1.0;
    for (int i = 0; i < ha.morse_index; ++i) {
      const Eigen::VectorXd v = ha.eigenvectors.col(i);
      const double transverse = 1.0 - std::pow(metric_dot(w, v, chord), 2);
      if (transverse > best_transverse) {
        best_transverse = transverse;
        best = i;
      }
    }
    bend = ha.eigenvectors.col(best) * (cfg.mp_bend * (attempt + 2));
    warnings.push_back("path crossed an index-" + std::to_string(r.morse_index) + " saddle; re-bent");
  }
  last.warnings.push_back("mountain pass ended at Morse index " + std::to_string(last.morse_index));
  return last;
}

/// One record per real zero of f: constant fields solve the problem exactly.
inline std::vector<CriticalPointRecord> find_constants(const EnergyFunctional& j, const SolverConfig& cfg = {}) {
  std::vector<CriticalPointRecord> out;
  for (double t : j.nonlinearity().zeros()) {
    const SpectralField c = j.space().constant(t);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    const std::string label(buf);
    CriticalPointRecord r =
        make_record(j, c.coeffs(), Classification::constant, "constant(" + label + ")", cfg.degeneracy_tol);
    out.push_back(std::move(r));
  }
  return out;
}

/// Deterministic order: energy, then coefficients lexicographically.
inline void sort_records(std::vector<CriticalPointRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const CriticalPointRecord& a, const CriticalPointRecord& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    const Eigen::VectorXd& x = a.u.coeffs();
    const Eigen::VectorXd& y = b.u.coeffs();
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  });
}

/// Keep the first of every cluster closer than `radius` in the metric.
inline std::vector<CriticalPointRecord> dedup_records(std::vector<CriticalPointRecord> records, const Eigen::VectorXd& w,
                                                      double radius) {
  std::vector<CriticalPointRecord> out;
  for (auto& r : records) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const CriticalPointRecord& o) {
      return metric_norm(w, o.u.coeffs() - r.u.coeffs()) <= radius;
    });
    if (!dup) out.push_back(std::move(r));
  }
  return out;
}

/// Random start in the ball of radius `radius`: Gaussian coefficients with
/// 1/(1 + lambda_j) decay (in H^1-scaled coordinates), uniform radial fraction.
inline Eigen::VectorXd random_start(const Eigen::VectorXd& w, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd z(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) z[i] = normal(rng) / w[i];
  z /= std::max(1e-300, z.norm());
  z *= radius * unif(rng);
  return z.cwiseQuotient(w.cwiseSqrt());
}

/// Critical points from seeds followed by `budget` random starts in B_R(0).
/// Each start is refined both by Newton on the gradient and by descent.
template <GradientFunctional F>
std::vector<CriticalPointRecord> multistart(const F& j, const SolverConfig& cfg, double radius,
                                            const std::vector<Eigen::VectorXd>& seeds = {}, int budget = -1,
                                            std::uint64_t stream = 0) {
  cfg.validate();
  const int random_count = budget < 0 ? cfg.multistart_budget : budget;
  const std::size_t total = seeds.size() + static_cast<std::size_t>(random_count);
  if (total == 0) return {};
  const Eigen::VectorXd& w = j.weights();

  std::vector<Eigen::VectorXd> starts(seeds.begin(), seeds.end());
  for (int i = 0; i < random_count; ++i) {
    std::mt19937_64 rng(cfg.rng_seed * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL +
                        static_cast<std::uint64_t>(i));
    starts.push_back(random_start(w, radius, rng));
  }

  // Descent is unbounded along X when f'(inf) crosses eigenvalues; a guard
  // ball tied to the search radius stops such runs early.
  SolverConfig local = cfg;
  local.divergence_radius = std::min(cfg.divergence_radius, 4.0 * radius + 10.0);

  std::vector<std::vector<CriticalPointRecord>> found(total);
  auto work = [&](std::size_t i) {
    const std::string tag = i < seeds.size() ? "seed" : "random";
    try {
      found[i].push_back(refine_to_record(j, starts[i], local, "multistart:newton:" + tag));
    } catch (const Error&) {
    }
    try {
      found[i].push_back(minimize(j, starts[i], local, "multistart:descent:" + tag));
    } catch (const Error&) {
    }
  };
  parallel_for(total, cfg.threads, work);

  std::vector<CriticalPointRecord> all;
  for (auto& f : found) {
    for (auto& r : f) {
      if (r.residual <= cfg.grad_tol && metric_norm(w, r.u.coeffs()) <= cfg.divergence_radius) all.push_back(std::move(r));
    }
  }
  sort_records(all);
  return dedup_records(std::move(all), w, cfg.dedup_radius);
}

struct HomotopyStage {
  double lambda = 0.0;
  int solutions = 0;
  double max_norm = 0.0;
  std::vector<double> norms;
};

struct HomotopyBound {
  double radius = 0.0;  // R = safety * max norm
  double safety = 2.0;
  double max_norm = 0.0;
  std::vector<HomotopyStage> stages;
};

/// Norm bound over solutions of the homotopy functionals along a lambda
/// grid; each stage is seeded with the previous stage's solutions.
inline HomotopyBound homotopy_bound(const Nonlinearity& f, const std::shared_ptr<const SpectralSpace>& space,
                                    std::vector<double> lambda_grid, const SolverConfig& cfg, double search_radius,
                                    int budget_per_stage, double safety = 2.0,
                                    double resonance_tol = kDefaultResonanceTol) {
  if (f.slope_minus_inf() != f.slope_plus_inf()) {
    throw Error(ErrorCode::AsymmetricSlopes, "homotopy needs f'(-inf) = f'(+inf)");
  }
  if (space->spectrum().resonance_gap(f.slope_plus_inf()) < resonance_tol) {
    throw Error(ErrorCode::ResonantSlope, "f'(inf) is a Neumann eigenvalue");
  }
  std::sort(lambda_grid.begin(), lambda_grid.end());
  HomotopyBound out;
  out.safety = safety;
  std::vector<Eigen::VectorXd> carry;
  for (double lam : lambda_grid) {
    const EnergyFunctional jl(space, homotopy_nonlinearity(f, lam));
    std::vector<Eigen::VectorXd> seeds = carry;
    for (const auto& c : find_constants(jl, cfg)) seeds.push_back(c.u.coeffs());
    seeds.push_back(Eigen::VectorXd::Zero(jl.size()));
    const std::vector<CriticalPointRecord> sols =
        multistart(jl, cfg, search_radius, seeds, budget_per_stage, static_cast<std::uint64_t>(lam * 1e6) + 1);
    HomotopyStage st;
    st.lambda = lam;
    st.solutions = static_cast<int>(sols.size());
    carry.clear();
    for (const auto& r : sols) {
      st.norms.push_back(r.h1_norm);
      st.max_norm = std::max(st.max_norm, r.h1_norm);
      carry.push_back(r.u.coeffs());
    }
    out.max_norm = std::max(out.max_norm, st.max_norm);
    out.stages.push_back(std::move(st));
  }
  out.radius = safety * out.max_norm;
  return out;
}

}  // namespace neumannlab
