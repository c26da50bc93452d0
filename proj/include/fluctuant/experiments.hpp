#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fluctuant/config.hpp"
#include "fluctuant/observers.hpp"

namespace fluctuant {

// One line of a verdict CSV. `value` is the measured quantity (lhs),
// `reference` the bound or target it is held against.
struct VerdictRow {
  std::string check;
  double value = 0.0;
  double ci_hi = 0.0;     // upper confidence end when MC, else == value
  double reference = 0.0;
  double ratio = 0.0;     // value / reference where meaningful
  double fitted_c = 0.0;  // fitted constant for existential-constant bounds
  bool pass = false;
  std::string note;
};

struct ExperimentResult {
  std::string name;
  bool pass = false;  // conjunction of all verdict rows
  std::vector<VerdictRow> verdicts;
  std::vector<std::string> files;  // artifacts written under out_dir
  double wall_seconds = 0.0;
};

// The grids, budgets, and dynamics each named experiment is calibrated for.
// Tolerances live in the drivers; these defaults are what the verdicts were
// sized against, so shrinking budgets can honestly flip a PASS.
ExperimentConfig default_experiment_config(const std::string& name);

// Run a named experiment end to end: compute, write raw/summary/verdict CSVs
// and manifest.json under cfg.out_dir (default out/<name>), return verdicts.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Trajectory ensemble shared by the Monte Carlo drivers. Each trajectory j
// draws its own RandomSource(seed, j+1), starts from a fresh Bernoulli(rho)
// configuration, and reports every observer at every microscopic checkpoint.
// The result is indexed [trajectory][observer][checkpoint] and is identical
// for any worker count.
struct EnsembleSpec {
  std::shared_ptr<const Model> model;
  int ring_sites = 0;
  double rho = 0.5;
  std::vector<double> micro_times;
  std::function<std::vector<std::unique_ptr<Observer>>()> make_observers;
  int trajectories = 0;
  int workers = 0;  // 0: FLUCTUANT_WORKERS env var, else hardware count
  std::uint64_t seed = 1;
  std::uint64_t resync_period = 1'000'000;
};

std::vector<std::vector<std::vector<double>>> run_ensemble(
    const EnsembleSpec& spec);

}  // namespace fluctuant
