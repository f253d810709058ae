#pragma once

#include <memory>
#include <string>

#include "neumannlab/neumannlab.hpp"

namespace testing_support {

inline std::string config_path(const std::string& name) { return std::string(NEUMANNLAB_CONFIG_DIR) + "/" + name; }

/// REF5 parameters without file output.
inline neumannlab::RunConfig ref5_config(int modes = 16, std::set<int> stages = {1, 2, 3, 4, 5, 6, 7, 8}) {
  neumannlab::RunConfig c = neumannlab::load_config(config_path("ref5.json"));
  c.domain.modes = modes;
  c.stages = std::move(stages);
  return c;
}

inline neumannlab::Nonlinearity ref5_f() {
  return neumannlab::Nonlinearity::build({{-2, 2.5}, {-1, -3}, {0, 2.5}, {1, -3}, {2, 2.5}}, 2.5, 2.5, 1.0);
}

inline std::shared_ptr<const neumannlab::SpectralSpace> ref5_space(int modes = 16) {
  return neumannlab::make_space(neumannlab::Domain::interval(std::numbers::pi, 512), modes);
}

/// One full REF5 run (stages 1-8) shared by the tests of a binary.
inline const neumannlab::RunReport& ref5_report() {
  static const neumannlab::RunReport rep = neumannlab::run_pipeline(ref5_config());
  return rep;
}

}  // namespace testing_support
