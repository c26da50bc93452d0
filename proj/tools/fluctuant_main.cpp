// fluctuant: simulate conservative lattice gases and verify their scaling
// limits against exact oracles.
//
//   fluctuant run <config>          one experiment from a TOML/JSON config
//   fluctuant verify --all          the full acceptance gate
//   fluctuant verify --experiment E one experiment with calibrated defaults
//   fluctuant verify --criterion N  one gate criterion
//   fluctuant oracle ...            closed-form variance oracles as CSV
//
// Exit codes: 0 all checks passed, 1 a check failed or a run errored,
// 2 the config or command line was invalid. FLUCTUANT_WORKERS overrides the
// worker-thread count when --workers is not given.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fluctuant/acceptance.hpp"
#include "fluctuant/config.hpp"
#include "fluctuant/errors.hpp"
#include "fluctuant/experiments.hpp"
#include "fluctuant/ou.hpp"
#include "fluctuant/toml.hpp"
#include "fluctuant/version.hpp"

namespace {

void print_result(const fluctuant::ExperimentResult& res) {
  for (const auto& r : res.verdicts) {
    std::printf("  %-28s %12.6g  ref %12.6g  %s%s%s\n", r.check.c_str(),
                r.value, r.reference, r.pass ? "PASS" : "FAIL",
                r.note.empty() ? "" : "  ", r.note.c_str());
  }
  std::printf("experiment %s: %s (%.1fs)\n", res.name.c_str(),
              res.pass ? "PASS" : "FAIL", res.wall_seconds);
}

int run_gate(int only) {
  int failures = 0;
  int lo = only ? only : 1;
  int hi = only ? only : fluctuant::criterion_count();
  for (int i = lo; i <= hi; ++i) {
    try {
      fluctuant::CriterionOutcome oc = fluctuant::run_criterion(i);
      std::printf("criterion %2d: %s  (%.1fs)  %s\n", i,
                  oc.pass ? "PASS" : "FAIL", oc.seconds, oc.detail.c_str());
      if (!oc.pass) ++failures;
    } catch (const std::exception& e) {
      std::printf("criterion %2d: FAIL  (error: %s)\n", i, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conservative lattice gas scaling-limit verification"};
  app.set_version_flag("--version", fluctuant::kVersion);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment from a config");
  std::string config_path;
  run->add_option("config", config_path, "TOML or JSON experiment config")
      ->required();
  int workers = 0;
  run->add_option("--workers", workers, "worker threads (0: use env/cores)");
  std::string out_dir;
  run->add_option("--out-dir", out_dir, "override the artifact directory");

  auto* verify = app.add_subcommand("verify", "run acceptance checks");
  bool all = false;
  verify->add_flag("--all", all, "every gate criterion (the default)");
  std::string exp_name;
  verify->add_option("--experiment", exp_name,
                     "one experiment with calibrated defaults");
  int criterion = 0;
  verify->add_option("--criterion", criterion, "one gate criterion (1..12)")
      ->check(CLI::Range(1, 12));
  int vworkers = 0;
  verify->add_option("--workers", vworkers, "worker threads for --experiment");

  auto* oracle = app.add_subcommand("oracle", "print variance oracles as CSV");
  std::string kind = "drift";
  oracle->add_option("--kind", kind, "drift or fbm")
      ->check(CLI::IsMember({"drift", "fbm"}));
  std::vector<double> t_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  oracle->add_option("--t", t_grid, "time grid");
  double a_prime = 0.0;
  oracle->add_option("--a-prime", a_prime,
                     "effective drift a(1-2rho) (kind drift)");
  double chi_rho = 0.25;
  oracle->add_option("--chi", chi_rho, "static susceptibility rho(1-rho)");
  double d_coef = 0.5;
  oracle->add_option("--d-coef", d_coef, "diffusion coefficient (kind fbm)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (run->parsed()) {
      nlohmann::json doc = fluctuant::load_config_file(config_path);
      fluctuant::ExperimentConfig cfg = fluctuant::parse_experiment_config(doc);
      if (workers > 0) cfg.workers = workers;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      fluctuant::ExperimentResult res = fluctuant::run_experiment(cfg);
      print_result(res);
      return res.pass ? 0 : 1;
    }
    if (verify->parsed()) {
      if (!exp_name.empty()) {
        fluctuant::ExperimentConfig cfg =
            fluctuant::default_experiment_config(exp_name);
        if (vworkers > 0) cfg.workers = vworkers;
        fluctuant::ExperimentResult res = fluctuant::run_experiment(cfg);
        print_result(res);
        return res.pass ? 0 : 1;
      }
      return run_gate(criterion);  // 0 means the full gate
    }
    if (oracle->parsed()) {
      std::printf("t,value\n");
      for (double t : t_grid) {
        double v = kind == "drift"
                       ? fluctuant::variance_oracle_drift(t, a_prime, chi_rho)
                       : fluctuant::variance_oracle_fbm(t, d_coef, chi_rho);
        std::printf("%.17g,%.17g\n", t, v);
      }
      return 0;
    }
  } catch (const fluctuant::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
