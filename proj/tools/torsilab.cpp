// torsilab command-line driver.
//
//   torsilab solve            --config cfg.json   single rigidity at the first grid time
//   torsilab flow             --config cfg.json   T, V series along the flow
//   torsilab certify          --config cfg.json   series + envelopes + verdicts
//   torsilab sweep            --config cfg.json   refinement study at t = 0
//   torsilab check-identities --config cfg.json   evolution identity residuals
//
// Exit codes: 0 ok, 2 config/usage error, 3 numeric or solver error,
// 4 a certified bound or monotonicity verdict was violated.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include "torsilab/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitViolation = 4;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("torsilab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("TORSILAB_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; treat them as a request for the default.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

struct Common {
  std::string config;
  std::string out_csv;
  std::string out_json;
  int threads = 1;
  std::uint64_t seed = 0;
  int levels = 4;
  double min_order = 0.0;
};

void emit(const std::string& csv_path, const std::string& json_path, const std::string& csv,
          const torsilab::Json& json) {
  if (!csv_path.empty()) {
    torsilab::write_atomic(csv_path, csv);
    spdlog::info("wrote {}", csv_path);
  }
  if (!json_path.empty()) {
    torsilab::write_atomic(json_path, json.dump(2) + "\n");
    spdlog::info("wrote {}", json_path);
  }
  if (csv_path.empty() && json_path.empty()) std::cout << csv;
}

int run_series(const Common& c, bool certify, bool only_first) {
  const torsilab::ExperimentConfig cfg = torsilab::load_config(c.config);
  torsilab::RunOptions opt;
  opt.envelopes = certify;
  opt.verdicts = certify;
  opt.only_first = only_first;
  opt.threads = c.threads;
  opt.log = [](const std::string& s) { spdlog::info("{}", s); };
  const torsilab::RunReport rep = torsilab::run(cfg, opt);
  emit(c.out_csv.empty() ? cfg.csv : c.out_csv, c.out_json.empty() ? cfg.json : c.out_json,
       torsilab::report_csv(rep), torsilab::report_json(rep));
  if (!certify) return kExitOk;
  for (const auto& cs : rep.containment)
    if (!cs.inside)
      spdlog::error("envelope '{}' violated, worst relative excess {} at t = {}", cs.tag,
                    cs.worst_excess, cs.worst_t);
  if (rep.verdicts)
    for (const auto& v : rep.verdicts->verdicts)
      if (v.certified && !v.passed)
        spdlog::error("{} expected {} but violated by {}", v.functional, to_string(v.expected),
                      v.worst_violation);
  return rep.certified_ok() ? kExitOk : kExitViolation;
}

int run_sweep(const Common& c) {
  const torsilab::ExperimentConfig cfg = torsilab::load_config(c.config);
  torsilab::RunOptions opt;
  opt.threads = c.threads;
  const torsilab::SweepReport s = torsilab::convergence_sweep(cfg, c.levels, opt);
  spdlog::info("extrapolated T = {}, observed order = {}", s.extrapolated, s.order);
  emit(c.out_csv.empty() ? cfg.csv : c.out_csv, c.out_json.empty() ? cfg.json : c.out_json,
       torsilab::sweep_csv(s), torsilab::sweep_json(cfg, s));
  return kExitOk;
}

int run_identities(const Common& c) {
  const torsilab::ExperimentConfig cfg = torsilab::load_config(c.config);
  const torsilab::FlowPath path = torsilab::make_path(cfg.flow);
  std::vector<double> ts = cfg.identities.t;
  if (ts.empty())
    for (double t : cfg.flow.t_grid)
      if (t > 0.0) ts.push_back(t);
  if (ts.empty()) throw torsilab::ConfigError("/identities/t", "no sample times");
  const auto tab = torsilab::check_identities(path, ts, cfg.identities.h, c.seed, cfg.identities.points);
  emit(c.out_csv.empty() ? cfg.csv : c.out_csv, c.out_json.empty() ? cfg.json : c.out_json,
       torsilab::identities_csv(tab), torsilab::identities_json(cfg, tab, c.seed));
  const double worst = torsilab::worst_order(tab);
  spdlog::info("worst observed order {}", worst);
  if (c.min_order > 0.0 && !std::isnan(worst) && worst < c.min_order) {
    spdlog::error("observed order {} below required {}", worst, c.min_order);
    return kExitViolation;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Torsional rigidity under geometric flows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(torsilab::kToolVersion));

  Common c;
  auto add_common = [&c](CLI::App* sub) {
    sub->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-csv", c.out_csv, "CSV output path (overrides outputs.csv)");
    sub->add_option("--out-json", c.out_json, "JSON report path (overrides outputs.json)");
    sub->add_option("--threads", c.threads, "Worker threads for independent samples")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "Seed for identity-check sample points");
  };
  auto* solve = app.add_subcommand("solve", "Rigidity at the first grid time");
  auto* flow = app.add_subcommand("flow", "Rigidity series along the flow");
  auto* certify = app.add_subcommand("certify", "Series with envelopes and monotonicity verdicts");
  auto* sweep = app.add_subcommand("sweep", "Refinement study at t = 0");
  auto* ident = app.add_subcommand("check-identities", "Finite-difference evolution identity residuals");
  for (auto* sub : {solve, flow, certify, sweep, ident}) add_common(sub);
  sweep->add_option("--levels", c.levels, "Number of refinement levels (>= 2)");
  ident->add_option("--min-order", c.min_order, "Fail with exit 4 below this observed order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*solve) return run_series(c, false, true);
    if (*flow) return run_series(c, false, false);
    if (*certify) return run_series(c, true, false);
    if (*sweep) return run_sweep(c);
    if (*ident) return run_identities(c);
  } catch (const torsilab::ConfigError& e) {
    spdlog::error("config error at '{}': {}", e.pointer, e.what());
    return kExitConfig;
  } catch (const torsilab::UsageError& e) {
    spdlog::error("usage error: {}", e.what());
    return kExitConfig;
  } catch (const torsilab::Error& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  }
  return kExitOk;
}
