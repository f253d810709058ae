#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neumannlab/error.hpp"
#include "neumannlab/ledger.hpp"
#include "neumannlab/nonlinearity.hpp"
#include "neumannlab/reduction.hpp"
#include "neumannlab/solvers.hpp"
#include "neumannlab/spectrum.hpp"

namespace neumannlab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Accepts numbers and the strings "pi", "2pi", "2*pi", "pi/2", "3*pi/4".
inline double parse_length(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw Error(ErrorCode::ConfigError, "length must be a number or a pi expression");
  std::string s = v.get<std::string>();
  std::erase(s, ' ');
  const auto p = s.find("pi");
  if (p == std::string::npos) {
    try {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, "cannot parse length '" + s + "'");
  }
  double coef = 1.0;
  std::string head = s.substr(0, p);
  if (!head.empty() && head.back() == '*') head.pop_back();
  std::string tail = s.substr(p + 2);
  try {
    if (!head.empty()) coef = std::stod(head);
    if (!tail.empty()) {
      if (tail[0] != '/') throw Error(ErrorCode::ConfigError, "cannot parse length '" + s + "'");
      coef /= std::stod(tail.substr(1));
    }
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ConfigError, "cannot parse length '" + s + "'");
  }
  return coef * std::numbers::pi;
}

struct DomainConfig {
  DomainKind kind = DomainKind::interval;
  std::vector<json> lengths{json("pi")};  // kept verbatim for the echo
  std::vector<int> quad_points{512};
  int modes = 16;

  Domain build() const {
    if (kind == DomainKind::interval) return Domain::interval(parse_length(lengths.at(0)), quad_points.at(0));
    return Domain::rectangle(parse_length(lengths.at(0)), parse_length(lengths.at(1)), quad_points.at(0),
                             quad_points.at(1));
  }
};

struct NonlinearityConfig {
  std::vector<Knot> knots;
  double slope_minus_inf = 0.0;
  double slope_plus_inf = 0.0;
  double blend_margin = 1.0;
  std::optional<double> linear;

  Nonlinearity build() const {
    if (linear) return Nonlinearity::linear(*linear);
    return Nonlinearity::build(knots, slope_minus_inf, slope_plus_inf, blend_margin);
  }
};

struct HomotopyConfig {
  std::vector<double> lambda_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  int budget_per_stage = 60;
  std::optional<double> search_radius;  // default: 2 * (largest zero) * sqrt|Omega| + 4
  double safety = 2.0;
};

struct OutputConfig {
  std::string dir = "results";
  std::string report = "report.json";
  std::string summary = "summary.csv";
  std::string plot = "profiles.svg";
  int profile_samples = 201;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  DomainConfig domain;
  NonlinearityConfig nonlinearity;
  SolverConfig solver;
  ReductionConfig reduction;
  HomotopyConfig homotopy;
  LedgerConfig ledger;
  OutputConfig output;
  std::set<int> stages{1, 2, 3, 4, 5, 6, 7, 8, 9};
  int stage8_batch = 50;

  void validate() const {
    if (schema_version != kSchemaVersion) {
      throw Error(ErrorCode::ConfigError, "unsupported schema_version " + std::to_string(schema_version));
    }
    for (int s : stages) {
      if (s < 1 || s > 9) throw Error(ErrorCode::ConfigError, "unknown stage " + std::to_string(s));
    }
    if (domain.modes < 2) throw Error(ErrorCode::ConfigError, "domain.modes must be at least 2");
    try {
      solver.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
    if (homotopy.lambda_grid.empty()) throw Error(ErrorCode::ConfigError, "homotopy.lambda_grid is empty");
    if (output.profile_samples < 2) throw Error(ErrorCode::ConfigError, "output.profile_samples must be >= 2");
    if (stage8_batch < 1) throw Error(ErrorCode::ConfigError, "stage8_batch must be positive");
  }
};

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw Error(ErrorCode::ConfigError, "unknown field '" + k + "' in " + where);
  }
}

}  // namespace detail

inline std::set<int> parse_stage_list(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.insert(std::stoi(item));
      } else {
        const int a = std::stoi(item.substr(0, dash));
        const int b = std::stoi(item.substr(dash + 1));
        for (int s = a; s <= b; ++s) out.insert(s);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "cannot parse stage list '" + text + "'");
    }
  }
  for (int s : out) {
    if (s < 1 || s > 9) throw Error(ErrorCode::ConfigError, "unknown stage " + std::to_string(s));
  }
  return out;
}

inline RunConfig parse_config(const json& j) {
  using detail::read;
  using detail::reject_unknown;
  RunConfig c;
  reject_unknown(j,
                 {"schema_version", "domain", "nonlinearity", "solver", "reduction", "homotopy", "ledger", "output",
                  "stages", "stage8_batch", "description"},
                 "config");
  read(j, "schema_version", c.schema_version);
  read(j, "stage8_batch", c.stage8_batch);

  if (j.contains("domain")) {
    const json& d = j["domain"];
    reject_unknown(d, {"kind", "length", "lengths", "quad_points", "modes"}, "domain");
    std::string kind = "interval";
    read(d, "kind", kind);
    if (kind == "interval") {
      c.domain.kind = DomainKind::interval;
      if (d.contains("length")) c.domain.lengths = {d["length"]};
      if (d.contains("quad_points")) c.domain.quad_points = {d["quad_points"].get<int>()};
    } else if (kind == "rectangle") {
      c.domain.kind = DomainKind::rectangle;
      if (!d.contains("lengths") || !d["lengths"].is_array() || d["lengths"].size() != 2) {
        throw Error(ErrorCode::ConfigError, "rectangle needs lengths: [Lx, Ly]");
      }
      c.domain.lengths = {d["lengths"][0], d["lengths"][1]};
      c.domain.quad_points = {64, 64};
      if (d.contains("quad_points")) {
        const json& q = d["quad_points"];
        if (q.is_number()) {
          c.domain.quad_points = {q.get<int>(), q.get<int>()};
        } else {
          read(d, "quad_points", c.domain.quad_points);
        }
      }
      if (c.domain.quad_points.size() != 2) throw Error(ErrorCode::ConfigError, "rectangle needs two quad_points");
    } else {
      throw Error(ErrorCode::ConfigError, "unknown domain kind '" + kind + "'");
    }
    read(d, "modes", c.domain.modes);
    for (const auto& l : c.domain.lengths) (void)parse_length(l);
  }

  if (!j.contains("nonlinearity")) throw Error(ErrorCode::ConfigError, "missing nonlinearity section");
  {
    const json& n = j["nonlinearity"];
    reject_unknown(n, {"knots", "slope_minus_inf", "slope_plus_inf", "slope_inf", "blend_margin", "linear"},
                   "nonlinearity");
    if (n.contains("linear")) {
      c.nonlinearity.linear = n["linear"].get<double>();
    } else {
      if (!n.contains("knots") || !n["knots"].is_array()) throw Error(ErrorCode::ConfigError, "nonlinearity.knots missing");
      for (const json& k : n["knots"]) {
        if (k.is_array() && k.size() == 2) {
          c.nonlinearity.knots.push_back({k[0].get<double>(), k[1].get<double>()});
        } else if (k.is_object()) {
          c.nonlinearity.knots.push_back({k.at("t").get<double>(), k.at("slope").get<double>()});
        } else {
          throw Error(ErrorCode::ConfigError, "knot must be [t, slope] or {t, slope}");
        }
      }
      if (n.contains("slope_inf")) {
        c.nonlinearity.slope_minus_inf = c.nonlinearity.slope_plus_inf = n["slope_inf"].get<double>();
      }
      read(n, "slope_minus_inf", c.nonlinearity.slope_minus_inf);
      read(n, "slope_plus_inf", c.nonlinearity.slope_plus_inf);
      read(n, "blend_margin", c.nonlinearity.blend_margin);
    }
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    reject_unknown(s,
                   {"grad_tol", "max_iters", "path_nodes", "dedup_radius", "multistart_budget", "rng_seed",
                    "degeneracy_tol", "mp_endpoint_offset", "mp_bend", "mp_step", "mp_switch_tol", "mp_max_sweeps",
                    "mp_retries", "newton_max_step", "threads"},
                   "solver");
    SolverConfig& o = c.solver;
    read(s, "grad_tol", o.grad_tol);
    read(s, "max_iters", o.max_iters);
    read(s, "path_nodes", o.path_nodes);
    read(s, "dedup_radius", o.dedup_radius);
    read(s, "multistart_budget", o.multistart_budget);
    read(s, "rng_seed", o.rng_seed);
    read(s, "degeneracy_tol", o.degeneracy_tol);
    read(s, "mp_endpoint_offset", o.mp_endpoint_offset);
    read(s, "mp_bend", o.mp_bend);
    read(s, "mp_step", o.mp_step);
    read(s, "mp_switch_tol", o.mp_switch_tol);
    read(s, "mp_max_sweeps", o.mp_max_sweeps);
    read(s, "mp_retries", o.mp_retries);
    read(s, "newton_max_step", o.newton_max_step);
    read(s, "threads", o.threads);
  }

  if (j.contains("reduction")) {
    const json& r = j["reduction"];
    reject_unknown(r,
                   {"inner_tol", "newton_switch", "max_inner_iters", "ascent_tol", "ascent_max_iters", "grid_radius",
                    "max_grid_points", "max_grid_k", "random_seeds"},
                   "reduction");
    ReductionConfig& o = c.reduction;
    read(r, "inner_tol", o.inner_tol);
    read(r, "newton_switch", o.newton_switch);
    read(r, "max_inner_iters", o.max_inner_iters);
    read(r, "ascent_tol", o.ascent_tol);
    read(r, "ascent_max_iters", o.ascent_max_iters);
    if (r.contains("grid_radius") && !r["grid_radius"].is_null()) o.grid_radius = r["grid_radius"].get<double>();
    read(r, "max_grid_points", o.max_grid_points);
    read(r, "max_grid_k", o.max_grid_k);
    read(r, "random_seeds", o.random_seeds);
  }

  if (j.contains("homotopy")) {
    const json& h = j["homotopy"];
    reject_unknown(h, {"lambda_grid", "budget_per_stage", "search_radius", "safety"}, "homotopy");
    read(h, "lambda_grid", c.homotopy.lambda_grid);
    read(h, "budget_per_stage", c.homotopy.budget_per_stage);
    if (h.contains("search_radius") && !h["search_radius"].is_null()) {
      c.homotopy.search_radius = h["search_radius"].get<double>();
    }
    read(h, "safety", c.homotopy.safety);
  }

  if (j.contains("ledger")) {
    const json& l = j["ledger"];
    reject_unknown(l, {"simplicity_tol", "qual_tol", "range_margin", "transfer_residual_factor"}, "ledger");
    read(l, "simplicity_tol", c.ledger.simplicity_tol);
    read(l, "qual_tol", c.ledger.qual_tol);
    read(l, "range_margin", c.ledger.range_margin);
    read(l, "transfer_residual_factor", c.ledger.transfer_residual_factor);
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    reject_unknown(o, {"dir", "report", "summary", "plot", "profile_samples"}, "output");
    read(o, "dir", c.output.dir);
    read(o, "report", c.output.report);
    read(o, "summary", c.output.summary);
    read(o, "plot", c.output.plot);
    read(o, "profile_samples", c.output.profile_samples);
  }

  if (j.contains("stages")) {
    const json& s = j["stages"];
    if (s.is_string()) {
      c.stages = s.get<std::string>() == "all" ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
                                               : parse_stage_list(s.get<std::string>());
    } else {
      c.stages.clear();
      for (const json& x : s) c.stages.insert(x.get<int>());
    }
  }
  c.ledger.dedup_radius = c.solver.dedup_radius;
  c.reduction.threads = c.solver.threads;
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed JSON: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

inline json to_json(const RunConfig& c) {
  json d;
  d["kind"] = c.domain.kind == DomainKind::interval ? "interval" : "rectangle";
  if (c.domain.kind == DomainKind::interval) {
    d["length"] = c.domain.lengths.at(0);
    d["quad_points"] = c.domain.quad_points.at(0);
  } else {
    d["lengths"] = c.domain.lengths;
    d["quad_points"] = c.domain.quad_points;
  }
  d["modes"] = c.domain.modes;

  json n;
  if (c.nonlinearity.linear) {
    n["linear"] = *c.nonlinearity.linear;
  } else {
    n["knots"] = json::array();
    for (const Knot& k : c.nonlinearity.knots) n["knots"].push_back({k.t, k.slope});
    n["slope_minus_inf"] = c.nonlinearity.slope_minus_inf;
    n["slope_plus_inf"] = c.nonlinearity.slope_plus_inf;
    n["blend_margin"] = c.nonlinearity.blend_margin;
  }

  const SolverConfig& s = c.solver;
  json sj = {{"grad_tol", s.grad_tol},
             {"max_iters", s.max_iters},
             {"path_nodes", s.path_nodes},
             {"dedup_radius", s.dedup_radius},
             {"multistart_budget", s.multistart_budget},
             {"rng_seed", s.rng_seed},
             {"degeneracy_tol", s.degeneracy_tol},
             {"mp_endpoint_offset", s.mp_endpoint_offset},
             {"mp_bend", s.mp_bend},
             {"mp_step", s.mp_step},
             {"mp_switch_tol", s.mp_switch_tol},
             {"mp_max_sweeps", s.mp_max_sweeps},
             {"mp_retries", s.mp_retries},
             {"newton_max_step", s.newton_max_step},
             {"threads", s.threads}};

  const ReductionConfig& r = c.reduction;
  json rj = {{"inner_tol", r.inner_tol},
             {"newton_switch", r.newton_switch},
             {"max_inner_iters", r.max_inner_iters},
             {"ascent_tol", r.ascent_tol},
             {"ascent_max_iters", r.ascent_max_iters},
             {"grid_radius", r.grid_radius ? json(*r.grid_radius) : json(nullptr)},
             {"max_grid_points", r.max_grid_points},
             {"max_grid_k", r.max_grid_k},
             {"random_seeds", r.random_seeds}};

  json hj = {{"lambda_grid", c.homotopy.lambda_grid},
             {"budget_per_stage", c.homotopy.budget_per_stage},
             {"search_radius", c.homotopy.search_radius ? json(*c.homotopy.search_radius) : json(nullptr)},
             {"safety", c.homotopy.safety}};
  json lj = {{"simplicity_tol", c.ledger.simplicity_tol},
             {"qual_tol", c.ledger.qual_tol},
             {"range_margin", c.ledger.range_margin},
             {"transfer_residual_factor", c.ledger.transfer_residual_factor}};
  json oj = {{"dir", c.output.dir},
             {"report", c.output.report},
             {"summary", c.output.summary},
             {"plot", c.output.plot},
             {"profile_samples", c.output.profile_samples}};
  return {{"schema_version", c.schema_version},
          {"domain", d},
          {"nonlinearity", n},
          {"solver", sj},
          {"reduction", rj},
          {"homotopy", hj},
          {"ledger", lj},
          {"output", oj},
          {"stages", std::vector<int>(c.stages.begin(), c.stages.end())},
          {"stage8_batch", c.stage8_batch}};
}

}  // namespace neumannlab
