#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <string>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "neumannlab/neumannlab.hpp"

namespace nl = neumannlab;
using nl::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;
constexpr int kExitDeficiency = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> modes;
  std::string format = "json";
  std::string stage;
  bool strict = false;
  std::string report;
};

nl::RunConfig load(const Options& o, bool required) {
  nl::RunConfig cfg;
  if (!o.config.empty()) {
    cfg = nl::load_config(o.config);
  } else if (required) {
    throw nl::Error(nl::ErrorCode::ConfigError, "--config is required");
  }
  if (o.seed) cfg.solver.rng_seed = *o.seed;
  if (o.modes) cfg.domain.modes = *o.modes;
  if (!o.out.empty()) cfg.output.dir = o.out;
  if (!o.stage.empty()) cfg.stages = nl::parse_stage_list(o.stage);
  cfg.validate();
  return cfg;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

int spectrum_cmd(const Options& o) {
  nl::RunConfig cfg = load(o, false);
  const nl::Domain d = cfg.domain.build();
  const nl::SpectrumSlice sp = nl::build_spectrum(d, cfg.domain.modes);
  std::optional<nl::SpectrumSlice> split;
  if (!o.config.empty()) {
    const nl::Nonlinearity f = cfg.nonlinearity.build();
    if (f.slope_minus_inf() == f.slope_plus_inf() && f.slope_plus_inf() > 0.0) {
      try {
        split = nl::split_spectrum(sp, f.slope_plus_inf());
      } catch (const nl::Error& e) {
        std::cerr << e.what() << "\n";
      }
    }
  }
  if (o.format == "csv") {
    std::cout << "j,eigenvalue,mode" << (split ? ",block" : "") << "\n";
    for (int j = 0; j < sp.size(); ++j) {
      const auto& p = sp.pairs()[static_cast<std::size_t>(j)];
      std::string mode;
      for (std::size_t a = 0; a < p.mode.size(); ++a) mode += (a ? ":" : "") + std::to_string(p.mode[a]);
      std::cout << j << ',' << num(p.eigenvalue) << ',' << mode;
      if (split) std::cout << ',' << (j < split->k() ? 'X' : 'Y');
      std::cout << "\n";
    }
    return kExitOk;
  }
  json out;
  out["eigenvalues"] = nl::to_std(sp.eigenvalues());
  json modes = json::array();
  for (const auto& p : sp.pairs()) modes.push_back(p.mode);
  out["modes"] = modes;
  if (split) {
    out["k"] = split->k();
    out["x_indices"] = split->x_indices();
    out["lambda_max_x"] = split->lambda_max_x();
    out["lambda_min_y"] = split->lambda_min_y();
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int finish(const nl::RunReport& rep, const Options& o, bool emit, bool print_ledger) {
  const json rj = nl::report_json(rep);
  if (emit) nl::emit_report(rep);
  if (o.format == "csv") {
    if (print_ledger) {
      std::cout << nl::summary_csv(rj);
    } else {
      std::cout << "stage,name,status,error\n";
      for (const auto& s : rep.stages) {
        std::cout << s.stage << ',' << s.name << ',' << s.status << ','
                  << (s.error ? std::string(nl::to_string(*s.error)) : std::string()) << "\n";
      }
    }
  } else {
    std::cout << rj.dump(2) << "\n";
  }
  for (const auto& s : rep.stages) {
    if (s.status == "failed") std::cerr << "stage " << s.stage << " (" << s.name << ") failed: " << s.message << "\n";
  }
  if (rep.stage_failed()) return kExitStage;
  if (o.strict && rep.final_reconcile && !rep.final_reconcile->balanced) {
    std::cerr << "unresolved degree deficiency " << rep.final_reconcile->deficiency << "\n";
    return kExitDeficiency;
  }
  return kExitOk;
}

int pipeline_cmd(const Options& o, std::set<int> stages, bool print_ledger) {
  nl::RunConfig cfg = load(o, true);
  if (o.stage.empty()) cfg.stages = std::move(stages);
  const bool emit_here = !cfg.stages.contains(9) && !o.out.empty();
  const nl::RunReport rep = nl::run_pipeline(cfg);
  return finish(rep, o, emit_here, print_ledger);
}

int check_cmd(const Options& o) {
  nl::RunConfig cfg = load(o, true);
  cfg.stages = {1};
  const nl::RunReport rep = nl::run_pipeline(cfg);
  if (!o.out.empty()) nl::emit_report(rep);
  json out = {{"stage", nl::report_json(rep)["stages"][0]},
              {"hypotheses", rep.hypotheses ? nl::to_json(*rep.hypotheses) : json(nullptr)}};
  if (o.format == "csv") {
    std::cout << "key,value\n";
    for (const auto& [k, v] : out["hypotheses"].items()) {
      if (!v.is_array() && !v.is_object()) std::cout << k << ',' << v.dump() << "\n";
    }
    const auto& st = rep.stage(1);
    std::cout << "status," << st.status << "\n";
    if (st.error) std::cout << "error," << nl::to_string(*st.error) << "\n";
  } else {
    std::cout << out.dump(2) << "\n";
  }
  if (rep.stage_failed()) {
    std::cerr << rep.stage(1).message << "\n";
    return kExitStage;
  }
  return kExitOk;
}

int plot_cmd(const Options& o) {
  if (o.report.empty()) throw nl::Error(nl::ErrorCode::ConfigError, "--report is required");
  std::ifstream in(o.report);
  if (!in) throw nl::Error(nl::ErrorCode::ConfigError, "cannot open report '" + o.report + "'");
  json rj;
  try {
    in >> rj;
  } catch (const json::exception& e) {
    throw nl::Error(nl::ErrorCode::ConfigError, std::string("malformed report: ") + e.what());
  }
  if (!rj.contains("profiles")) throw nl::Error(nl::ErrorCode::ConfigError, "report has no profiles");
  namespace fs = std::filesystem;
  const fs::path dir(o.out.empty() ? "." : o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::string name = "profiles.svg";
  if (rj.contains("config") && rj["config"].contains("output")) {
    name = rj["config"]["output"].value("plot", name);
  }
  nl::write_text(dir / name, nl::profiles_svg(rj["profiles"]));
  std::cout << (dir / name).string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-Galerkin lab for -Laplace u = f(u) with Neumann boundary conditions"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Run configuration (JSON)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "RNG seed override");
  app.add_option("--modes", o.modes, "Number of Galerkin modes")->check(CLI::PositiveNumber);
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--stage", o.stage, "Stage list, e.g. 1-5 or 1,2,7");
  app.add_flag("--strict", o.strict, "Exit 3 when the degree deficiency stays nonzero");

  auto* spectrum = app.add_subcommand("spectrum", "Print eigenvalues and the spectral split");
  auto* check = app.add_subcommand("check", "Hypothesis report");
  auto* solve = app.add_subcommand("solve", "Constants, truncation saddles and the homotopy bound (stages 1-5)");
  auto* reduce = app.add_subcommand("reduce", "Reduction maximizer (stage 6)");
  auto* ledger = app.add_subcommand("ledger", "Degree ledger and multistart (stages 7-8)");
  auto* run = app.add_subcommand("run", "Full pipeline");
  auto* plot = app.add_subcommand("plot", "SVG profiles from a report");
  plot->add_option("--report", o.report, "report.json from a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (spectrum->parsed()) return spectrum_cmd(o);
    if (check->parsed()) return check_cmd(o);
    if (solve->parsed()) return pipeline_cmd(o, {1, 2, 3, 4, 5}, false);
    if (reduce->parsed()) return pipeline_cmd(o, {1, 2, 5, 6}, false);
    if (ledger->parsed()) return pipeline_cmd(o, {1, 2, 3, 4, 5, 6, 7, 8}, true);
    if (run->parsed()) {
      nl::RunConfig cfg = load(o, true);
      const nl::RunReport rep = nl::run_pipeline(cfg);
      for (const auto& w : rep.written) std::cerr << "wrote " << w << "\n";
      return finish(rep, o, false, true);
    }
    if (plot->parsed()) return plot_cmd(o);
  } catch (const nl::Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == nl::ErrorCode::ConfigError ? kExitConfig : kExitStage;
  }
  return kExitConfig;
}
