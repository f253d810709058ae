#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neumannlab/config.hpp"
#include "neumannlab/energy.hpp"
#include "neumannlab/error.hpp"
#include "neumannlab/ledger.hpp"
#include "neumannlab/morse.hpp"
#include "neumannlab/nonlinearity.hpp"
#include "neumannlab/reduction.hpp"
#include "neumannlab/solvers.hpp"
#include "neumannlab/spectrum.hpp"

#ifndef NEUMANNLAB_VERSION
#define NEUMANNLAB_VERSION "0.1.0"
#endif

namespace neumannlab {

inline constexpr std::array<const char*, 9> kStageNames = {
    "spectrum", "constants", "one_sided_truncations", "interval_truncation", "homotopy_bound",
    "reduction", "ledger",   "multistart",            "emit"};

struct StageStatus {
  int stage = 0;
  std::string name;
  std::string status = "not_run";  // ok | skipped | failed | not_run
  std::optional<ErrorCode> error;
  std::string message;
};

struct RunReport {
  RunConfig config;
  std::shared_ptr<const SpectralSpace> space;
  std::optional<Nonlinearity> nonlinearity;
  std::optional<SpectrumSlice> split;
  std::optional<HypothesisReport> hypotheses;
  std::vector<CriticalPointRecord> constants;
  std::vector<CriticalPointRecord> truncation_solutions;  // transferred to the original functional
  std::optional<HomotopyBound> homotopy;
  std::optional<ReductionResult> reduction;
  std::optional<std::string> reduction_coincides_with;
  std::vector<CriticalPointRecord> multistart_finds;
  std::optional<DegreeLedger> ledger;
  std::optional<LedgerReport> initial_reconcile;
  std::optional<LedgerReport> final_reconcile;
  std::vector<StageStatus> stages;
  std::map<std::string, double> timings;
  std::vector<std::string> warnings;
  std::vector<std::string> written;

  bool stage_failed() const {
    return std::any_of(stages.begin(), stages.end(), [](const StageStatus& s) { return s.status == "failed"; });
  }
  const StageStatus& stage(int s) const { return stages.at(static_cast<std::size_t>(s - 1)); }
};

namespace detail {

inline void set_classification_from_signature(CriticalPointRecord& r, const LedgerConfig& lc) {
  if (r.classification == Classification::constant || r.classification == Classification::reduction_max) return;
  const bool hk = hess_kato_check(r, {lc.simplicity_tol, lc.qual_tol}).value_or(false);
  if (r.morse_index == 1 && !r.degenerate && hk) {
    r.classification = Classification::mp_type;
  } else if (r.classification == Classification::mp_type) {
    r.classification = Classification::other;
  }
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline json to_json(const HypothesisReport& h) {
  json zeros = json::array();
  for (const ZeroInfo& z : h.zeros) {
    zeros.push_back({{"t", z.t},
                     {"slope", z.slope},
                     {"type", z.type == ZeroInfo::Type::minimum ? "minimum" : "crossing"},
                     {"k_i", z.k_i},
                     {"resonant", z.resonant}});
  }
  return {{"slope_minus_inf", h.slope_minus_inf},
          {"slope_plus_inf", h.slope_plus_inf},
          {"slopes_symmetric", h.slopes_symmetric},
          {"nonresonant_at_infinity", h.nonresonant_at_infinity},
          {"k", h.k},
          {"crossed_eigenvalues", h.crossed_eigenvalues},
          {"zeros", zeros},
          {"gamma", h.gamma},
          {"lambda_min_y", std::isfinite(h.lambda_min_y) ? json(h.lambda_min_y) : json(nullptr)},
          {"reduction_applicable", h.reduction_applicable},
          {"five_solution_pattern", h.five_solution_pattern},
          {"some_crossing_matches_k", h.some_crossing_matches_k},
          {"extra_solution_condition", h.extra_solution_condition},
          {"diagnostics", h.diagnostics}};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline json to_json(const CriticalPointRecord& r) {
  json out = {{"provenance", r.provenance},
              {"classification", to_string(r.classification)},
              {"energy", r.energy},
              {"residual", r.residual},
              {"h1_norm", r.h1_norm},
              {"morse_index", r.morse_index},
              {"degenerate", r.degenerate},
              {"range", {r.range_min, r.range_max}},
              {"hessian_eigs", to_std(r.hessian_eigs)},
              {"coefficients", to_std(r.u.coeffs())},
              {"iterations", r.iterations},
              {"warnings", r.warnings}};
  if (r.truncation) {
    json t = {{"type", to_string(r.truncation->type)}};
    if (r.truncation->type == TruncationKind::Type::homotopy) {
      t["lambda"] = r.truncation->lambda;
    } else {
      t["alpha"] = r.truncation->alpha;
      if (r.truncation->type == TruncationKind::Type::interval) t["beta"] = r.truncation->beta;
    }
    out["truncation"] = t;
  }
  const auto hk = hess_kato_check(r);
  out["hess_kato"] = hk ? json(*hk) : json(nullptr);
  return out;
}

inline json to_json(const QualitativeReport& q) {
  json checks = json::array();
  for (const auto& c : q.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}});
  return {{"pass", q.pass}, {"checks", checks}};
}

inline json to_json(const LedgerReport& l) {
  json sugg = json::array();
  for (const auto& s : l.suggestions) sugg.push_back({{"reason", s.reason}, {"center", to_std(s.center)}});
  return {{"k", l.k},
          {"R", l.radius},
          {"global_degree", l.global_degree},
          {"degree_sum", l.degree_sum},
          {"deficiency", l.deficiency},
          {"counted", l.counted},
          {"nonconstant", l.nonconstant},
          {"balanced", l.balanced},
          {"undiscovered_asserted", l.undiscovered_asserted},
          {"flags", l.flags},
          {"suggestions", sugg}};
}

/// Samples of every ledger record along x (interval) or the diagonal
/// (rectangle), parametrized by s in [0, 1] times the axis length.
inline json profiles_json(const RunReport& rep) {
  json out = {{"axis", "x"}, {"s", json::array()}, {"curves", json::array()}};
  if (!rep.ledger || !rep.space) return out;
  const SpectrumSlice& sp = rep.space->spectrum();
  const Domain& d = sp.domain();
  const int n = rep.config.output.profile_samples;
  std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n));
  std::vector<double> s(static_cast<std::size_t>(n));
  const bool rect = d.kind == DomainKind::rectangle;
  const double diag = rect ? std::hypot(d.lengths[0], d.lengths[1]) : d.lengths[0];
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    s[static_cast<std::size_t>(i)] = t * diag;
    pts[static_cast<std::size_t>(i)] = {t * d.lengths[0], rect ? t * d.lengths[1] : 0.0};
  }
  out["axis"] = rect ? "diagonal" : "x";
  out["s"] = s;
  int id = 0;
  for (const auto& e : rep.ledger->entries()) {
    std::vector<double> u(static_cast<std::size_t>(n), 0.0);
    const Eigen::VectorXd& c = e.record.u.coeffs();
    for (int i = 0; i < n; ++i) {
      const auto& p = pts[static_cast<std::size_t>(i)];
      double v = 0.0;
      for (int q = 0; q < sp.size(); ++q) {
        v += c[q] * sp.pairs()[static_cast<std::size_t>(q)](std::span<const double>(p.data(), d.dimension()),
                                                            std::span<const double>(d.lengths));
      }
      u[static_cast<std::size_t>(i)] = v;
    }
    out["curves"].push_back({{"id", id++}, {"label", e.record.provenance}, {"u", u}});
  }
  return out;
}

inline json report_json(const RunReport& rep) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["artifact"] = {{"name", "neumannlab"}, {"version", NEUMANNLAB_VERSION}};
  out["config"] = to_json(rep.config);
  json stages = json::array();
  for (const auto& s : rep.stages) {
    stages.push_back({{"stage", s.stage},
                      {"name", s.name},
                      {"status", s.status},
                      {"error", s.error ? json(std::string(to_string(*s.error))) : json(nullptr)},
                      {"message", s.message}});
  }
  out["stages"] = stages;
  out["hypotheses"] = rep.hypotheses ? to_json(*rep.hypotheses) : json(nullptr);
  if (rep.space) {
    const SpectrumSlice& sp = rep.space->spectrum();
    json modes = json::array();
    for (const auto& p : sp.pairs()) modes.push_back(p.mode);
    out["spectrum"] = {{"eigenvalues", to_std(sp.eigenvalues())}, {"modes", modes}};
    if (rep.split) {
      out["spectrum"]["k"] = rep.split->k();
      out["spectrum"]["x_indices"] = rep.split->x_indices();
      out["spectrum"]["lambda_min_y"] = rep.split->lambda_min_y();
    }
  }
  auto records = [](const std::vector<CriticalPointRecord>& v) {
    json a = json::array();
    for (const auto& r : v) a.push_back(to_json(r));
    return a;
  };
  out["constants"] = records(rep.constants);
  out["truncation_solutions"] = records(rep.truncation_solutions);
  if (rep.homotopy) {
    json st = json::array();
    for (const auto& s : rep.homotopy->stages) {
      st.push_back({{"lambda", s.lambda}, {"solutions", s.solutions}, {"max_norm", s.max_norm}, {"norms", s.norms}});
    }
    out["homotopy"] = {{"R", rep.homotopy->radius},
                       {"safety", rep.homotopy->safety},
                       {"max_norm", rep.homotopy->max_norm},
                       {"stages", st}};
  } else {
    out["homotopy"] = nullptr;
  }
  if (rep.reduction) {
    out["reduction"] = {{"record", to_json(rep.reduction->record)},
                        {"reduced_max", rep.reduction->reduced_max},
                        {"grid_max", rep.reduction->grid_max},
                        {"seed_radius", rep.reduction->seed_radius},
                        {"grid_points", rep.reduction->grid_points},
                        {"ascents", rep.reduction->ascents},
                        {"coincides_with",
                         rep.reduction_coincides_with ? json(*rep.reduction_coincides_with) : json(nullptr)}};
  } else {
    out["reduction"] = nullptr;
  }
  out["multistart_finds"] = records(rep.multistart_finds);
  if (rep.ledger) {
    json entries = json::array();
    int id = 0;
    for (const auto& e : rep.ledger->entries()) {
      json r = to_json(e.record);
      r["id"] = id++;
      r["degree"] = e.degree ? json(*e.degree) : json(nullptr);
      r["inside_ball"] = e.inside_ball;
      r["aliases"] = e.aliases;
      r["flags"] = e.flags;
      r["qualitative"] = to_json(e.qualitative);
      entries.push_back(r);
    }
    out["ledger"] = {{"entries", entries},
                     {"initial", to_json(*rep.initial_reconcile)},
                     {"final", to_json(*rep.final_reconcile)}};
  } else {
    out["ledger"] = nullptr;
  }
  out["profiles"] = profiles_json(rep);
  out["warnings"] = rep.warnings;
  out["timings"] = rep.timings;
  return out;
}

inline std::string summary_csv(const json& report) {
  std::ostringstream os;
  os << "id,provenance,classification,energy,morse_index,degree,min_u,max_u,residual\n";
  if (!report.contains("ledger") || report["ledger"].is_null()) return os.str();
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  for (const json& e : report["ledger"]["entries"]) {
    os << e["id"].get<int>() << ',' << '"' << e["provenance"].get<std::string>() << '"' << ','
       << e["classification"].get<std::string>() << ',' << num(e["energy"].get<double>()) << ','
       << e["morse_index"].get<int>() << ',' << (e["degree"].is_null() ? std::string() : std::to_string(e["degree"].get<int>()))
       << ',' << num(e["range"][0].get<double>()) << ',' << num(e["range"][1].get<double>()) << ','
       << num(e["residual"].get<double>()) << '\n';
  }
  return os.str();
}

/// Standalone SVG line plot of the "profiles" block of a report.
inline std::string profiles_svg(const json& profiles) {
  const double width = 820.0, height = 520.0;
  const double left = 70.0, right = 230.0, top = 30.0, bottom = 60.0;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto s = profiles.at("s").get<std::vector<double>>();
  double umin = 0.0, umax = 0.0;
  bool first = true;
  for (const json& c : profiles.at("curves")) {
    for (double v : c.at("u").get<std::vector<double>>()) {
      umin = first ? v : std::min(umin, v);
      umax = first ? v : std::max(umax, v);
      first = false;
    }
  }
  if (umax - umin < 1e-9) {
    umin -= 1.0;
    umax += 1.0;
  }
  const double pad = 0.05 * (umax - umin);
  umin -= pad;
  umax += pad;
  const double smin = s.empty() ? 0.0 : s.front();
  const double smax = s.empty() ? 1.0 : s.back();
  auto px = [&](double x) { return left + pw * (x - smin) / std::max(1e-300, smax - smin); };
  auto py = [&](double y) { return top + ph * (umax - y) / (umax - umin); };
  char buf[160];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = smin + (smax - smin) * i / 4.0;
    const double y = umin + (umax - umin) * i / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\">%.3g</text>\n", px(x),
                  top + ph + 18.0, x);
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\">%.3g</text>\n", left - 6.0,
                  py(y) + 4.0, y);
    os << buf;
  }
  if (umin < 0.0 && umax > 0.0) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#bbbbbb\"/>\n",
                  left, py(0.0), left + pw, py(0.0));
    os << buf;
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
     << profiles.value("axis", std::string("x")) << "</text>\n";
  os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 18 " << top + ph / 2
     << ")\" text-anchor=\"middle\">u</text>\n";
  static const std::array<const char*, 10> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  int idx = 0;
  for (const json& c : profiles.at("curves")) {
    const auto u = c.at("u").get<std::vector<double>>();
    const char* color = palette[static_cast<std::size_t>(idx) % palette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < u.size() && i < s.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(s[i]), py(u[i]));
      os << buf;
    }
    os << "\"/>\n";
    const double ly = top + 14.0 + 16.0 * idx;
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\"/>\n",
                  left + pw + 12.0, ly - 4.0, left + pw + 32.0, ly - 4.0, color);
    os << buf;
    std::string label = std::to_string(c.at("id").get<int>()) + " " + c.at("label").get<std::string>();
    std::string escaped;
    for (char ch : label) {
      if (ch == '<') escaped += "&lt;";
      else if (ch == '>') escaped += "&gt;";
      else if (ch == '&') escaped += "&amp;";
      else escaped += ch;
    }
    os << "<text x=\"" << left + pw + 38.0 << "\" y=\"" << ly << "\">" << escaped << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + p.string() + "'");
  out << text;
}

/// Writes report.json, summary.csv and profiles.svg into the output dir.
inline std::vector<std::string> emit_report(const RunReport& rep, const std::string& dir_override = {}) {
  namespace fs = std::filesystem;
  const fs::path dir(dir_override.empty() ? rep.config.output.dir : dir_override);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ConfigError, "cannot create output directory '" + dir.string() + "'");
  const json rj = report_json(rep);
  const fs::path report = dir / rep.config.output.report;
  const fs::path summary = dir / rep.config.output.summary;
  const fs::path plot = dir / rep.config.output.plot;
  write_text(report, rj.dump(2) + "\n");
  write_text(summary, summary_csv(rj));
  write_text(plot, profiles_svg(rj["profiles"]));
  return {report.string(), summary.string(), plot.string()};
}

/// Runs the selected stages. Stage errors are recorded in the report and
/// later stages continue where their inputs exist; config errors throw.
inline RunReport run_pipeline(const RunConfig& cfg_in) {
  using Clock = std::chrono::steady_clock;
  RunReport rep;
  rep.config = cfg_in;
  RunConfig& cfg = rep.config;
  cfg.validate();
  for (int s = 1; s <= 9; ++s) rep.stages.push_back({s, kStageNames[static_cast<std::size_t>(s - 1)]});

  auto selected = [&](int s) { return cfg.stages.contains(s); };
  auto run_stage = [&](int s, auto&& body) {
    StageStatus& st = rep.stages[static_cast<std::size_t>(s - 1)];
    if (!selected(s)) return;
    const auto t0 = Clock::now();
    try {
      st.status = "ok";
      body(st);
    } catch (const Error& e) {
      st.status = "failed";
      st.error = e.code();
      st.message = e.what();
    }
    rep.timings[st.name] = std::chrono::duration<double>(Clock::now() - t0).count();
  };
  auto skip = [](StageStatus& st, std::string why, std::optional<ErrorCode> code = std::nullopt) {
    st.status = "skipped";
    st.message = std::move(why);
    st.error = code;
  };

  // Stage 1 is the foundation of everything else and always runs.
  cfg.stages.insert(1);
  const Domain domain = cfg.domain.build();
  run_stage(1, [&](StageStatus&) {
    rep.space = make_space(domain, cfg.domain.modes);
    rep.nonlinearity = cfg.nonlinearity.build();
    rep.hypotheses = check_hypotheses(*rep.nonlinearity, rep.space->spectrum());
    if (!rep.hypotheses->nonresonant_at_infinity) {
      throw Error(ErrorCode::ResonantSlope, "f'(inf) is a Neumann eigenvalue");
    }
    if (rep.hypotheses->slopes_symmetric) {
      rep.split = split_spectrum(rep.space->spectrum(), rep.nonlinearity->slope_plus_inf());
    }
  });
  if (rep.stages[0].status != "ok") {
    if (rep.stages[0].error && *rep.stages[0].error == ErrorCode::ConfigError) {
      throw Error(ErrorCode::ConfigError, rep.stages[0].message);
    }
    return rep;
  }

  const Nonlinearity& f = *rep.nonlinearity;
  const EnergyFunctional j(rep.space, f);
  SolverConfig scfg = cfg.solver;
  const LedgerConfig& lc = cfg.ledger;
  const int k = rep.hypotheses->k;
  const double sqrt_measure = std::sqrt(domain.measure());

  std::vector<double> minimum_zeros;
  for (const ZeroInfo& z : rep.hypotheses->zeros) {
    if (z.type == ZeroInfo::Type::minimum) minimum_zeros.push_back(z.t);
  }

  run_stage(2, [&](StageStatus&) { rep.constants = find_constants(j, scfg); });

  auto truncated_mp = [&](TruncationKind kind, double from, double to, const std::string& label) {
    const Nonlinearity g = truncate(f, kind);
    const EnergyFunctional jg(rep.space, g);
    CriticalPointRecord r = mountain_pass(jg, rep.space->constant(from).coeffs(), rep.space->constant(to).coeffs(),
                                          scfg, label);
    r.truncation = kind;
    CriticalPointRecord t = transfer_to_original(r, j, g, lc.range_margin, scfg.degeneracy_tol);
    if (t.residual > lc.transfer_residual_factor * scfg.grad_tol) {
      t.warnings.push_back("residual under the original functional exceeds the transfer bound");
    }
    detail::set_classification_from_signature(t, lc);
    rep.truncation_solutions.push_back(std::move(t));
  };

  run_stage(3, [&](StageStatus& st) {
    if (minimum_zeros.empty()) return skip(st, "no zero with f' < 0");
    const double lo = minimum_zeros.front();
    const double hi = minimum_zeros.back();
    std::vector<std::string> errors;
    try {
      truncated_mp(TruncationKind::below(lo), lo, lo - scfg.mp_endpoint_offset, "mp:below(" + detail::fmt(lo) + ")");
    } catch (const Error& e) {
      errors.push_back(std::string("below: ") + e.what());
    }
    try {
      truncated_mp(TruncationKind::above(hi), hi, hi + scfg.mp_endpoint_offset, "mp:above(" + detail::fmt(hi) + ")");
    } catch (const Error& e) {
      errors.push_back(std::string("above: ") + e.what());
    }
    if (!errors.empty()) {
      st.message = errors.front();
      throw Error(ErrorCode::PathCollapse, errors.front());
    }
  });

  run_stage(4, [&](StageStatus& st) {
    if (minimum_zeros.size() < 2) return skip(st, "fewer than two zeros with f' < 0");
    const double lo = minimum_zeros.front();
    const double hi = minimum_zeros.back();
    truncated_mp(TruncationKind::between(lo, hi), lo, hi,
                 "mp:interval(" + detail::fmt(lo) + "," + detail::fmt(hi) + ")");
  });

  // Ball radius for seeding and degree counting; stage 5 replaces the fallback.
  double max_zero = 0.0;
  for (double t : f.zeros()) max_zero = std::max(max_zero, std::abs(t));
  const double search_radius = cfg.homotopy.search_radius.value_or(2.0 * max_zero * sqrt_measure + 4.0);
  double radius = cfg.homotopy.safety * std::max(max_zero * sqrt_measure, 1.0);
  run_stage(5, [&](StageStatus&) {
    rep.homotopy = homotopy_bound(f, rep.space, cfg.homotopy.lambda_grid, scfg, search_radius,
                                  cfg.homotopy.budget_per_stage, cfg.homotopy.safety);
    radius = rep.homotopy->radius;
    scfg.divergence_radius = std::max(radius * cfg.homotopy.safety, search_radius);
  });

  run_stage(6, [&](StageStatus& st) {
    if (!rep.hypotheses->slopes_symmetric) return skip(st, "f'(-inf) != f'(+inf)", ErrorCode::AsymmetricSlopes);
    std::optional<ReductionContext> ctx;
    try {
      ctx.emplace(j, cfg.reduction);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ReductionInapplicable) return skip(st, e.what(), e.code());
      throw;
    }
    std::vector<Eigen::VectorXd> seeds;
    for (const auto& c : rep.constants) seeds.push_back(c.u.coeffs());
    rep.reduction = maximize_reduced(*ctx, scfg, radius, seeds);
  });

  const auto reflections = rep.space->reflections();
  auto ledger_add = [&](CriticalPointRecord r) -> bool {
    if (r.residual > lc.transfer_residual_factor * scfg.grad_tol) {
      rep.warnings.push_back(r.provenance + ": residual " + detail::fmt(r.residual) + " too large, not admitted");
      return false;
    }
    QualitativeReport q = qualitative_classify(r, f, lc.qual_tol);
    if (!q.pass) {
      rep.warnings.push_back(r.provenance + ": qualitative check failed, not admitted");
      return false;
    }
    return rep.ledger->add(std::move(r), std::move(q));
  };

  run_stage(7, [&](StageStatus&) {
    rep.ledger.emplace(k, radius, j.weights(), lc);
    for (const auto& c : rep.constants) ledger_add(c);
    for (const auto& t : rep.truncation_solutions) ledger_add(t);
    if (rep.reduction) {
      const CriticalPointRecord& r = rep.reduction->record;
      if (auto i = rep.ledger->find(r.u.coeffs())) {
        rep.reduction_coincides_with = rep.ledger->entries()[*i].record.provenance;
      }
      ledger_add(r);
    }
    rep.initial_reconcile = reconcile(*rep.ledger, reflections);
    rep.final_reconcile = rep.initial_reconcile;
  });

  run_stage(8, [&](StageStatus& st) {
    if (!rep.ledger) return skip(st, "ledger stage did not run");
    if (rep.final_reconcile->balanced) return skip(st, "deficiency is zero");
    int remaining = scfg.multistart_budget;
    std::uint64_t batch = 0;
    std::vector<Eigen::VectorXd> seeds;
    for (const auto& s : rep.final_reconcile->suggestions) seeds.push_back(s.center);
    while (!rep.final_reconcile->balanced && (remaining > 0 || !seeds.empty())) {
      const int count = std::min(remaining, cfg.stage8_batch);
      remaining -= count;
      std::vector<CriticalPointRecord> found = multistart(j, scfg, radius, seeds, count, ++batch);
      seeds.clear();
      for (auto& r : found) {
        if (rep.ledger->find(r.u.coeffs())) continue;
        detail::set_classification_from_signature(r, lc);
        r.provenance = "multistart:" + std::to_string(batch);
        CriticalPointRecord copy = r;
        if (ledger_add(std::move(r))) rep.multistart_finds.push_back(std::move(copy));
      }
      rep.final_reconcile = reconcile(*rep.ledger, reflections);
      for (const auto& s : rep.final_reconcile->suggestions) seeds.push_back(s.center);
      if (remaining <= 0) break;
    }
  });

  if (rep.ledger && rep.homotopy) {
    for (const auto& e : rep.ledger->entries()) {
      if (e.record.h1_norm > rep.homotopy->max_norm * (1.0 + 1e-9)) {
        rep.warnings.push_back("homotopy bound underestimated: " + e.record.provenance + " has H1 norm " +
                               detail::fmt(e.record.h1_norm) + " > R/safety");
        break;
      }
    }
  }

  run_stage(9, [&](StageStatus&) { rep.written = emit_report(rep); });
  return rep;
}

}  // namespace neumannlab
