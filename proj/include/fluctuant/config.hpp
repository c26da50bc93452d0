#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fluctuant/dynamics.hpp"
#include "fluctuant/local_function.hpp"
#include "fluctuant/observers.hpp"

namespace fluctuant {

// Dynamics selection. `kind` is one of:
//   "nearest"   speed-change with nearest-neighbour window bits (needs b)
//   "constant"  speed-change with constant swap rate (needs r)
//   "mean-zero" finite-range jumps with a mean-zero kernel (needs kernel)
//   "wasep"     weakly asymmetric jumps p(+-1) = (1 -+ a/n^gamma)/2
struct ModelConfig {
  std::string kind = "constant";
  double b = 0.0;
  double r = 1.0;
  double a = 0.0;
  double gamma = 1.0;
  std::vector<JumpModel::Entry> kernel;
};

// A fully validated experiment description. Grids an experiment does not use
// may stay empty; each driver fills in its defaults.
struct ExperimentConfig {
  std::string experiment;
  ModelConfig model;

  double rho = 0.5;        // target density, in (0, 1)
  int n = 64;              // scaling parameter
  int ring_sites = 0;      // lattice size; 0 means the driver default
  std::vector<double> t_grid;   // macroscopic observation times, increasing
  std::vector<double> eps_grid; // coarse-graining widths, each with eps*n >= 2
  std::vector<int> ell_grid;    // block lengths, each >= 2
  std::vector<int> radius_grid; // variational basis radii, each >= 0

  std::string local_function;   // preset name; empty = driver default
  std::string test_function = "bump";
  double test_cutoff = 1.0;

  int trajectories = 0;    // 0 means the driver default
  int workers = 0;         // 0 means FLUCTUANT_WORKERS or hardware count
  std::uint64_t seed = 1;
  std::string out_dir;     // empty means "out/<experiment>"

  nlohmann::json raw;      // the document this config was parsed from
};

// Names of all runnable experiments, in canonical order.
const std::vector<std::string>& experiment_names();

// Parse and validate a config document. Throws ConfigError naming the
// offending field path (e.g. "params.rho") on any violation.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

// Instantiate the dynamics described by `mc` on a ring where the weak
// asymmetry scale is n.
std::shared_ptr<const Model> build_model(const ModelConfig& mc, int n);

// Named local-function presets, centred where the name says so:
//   "occupation"       eta(1) - rho
//   "pair"             eta(1) eta(2)
//   "pair-centered"    eta(1) eta(2) - rho^2
//   "product-centered" (eta(1) - rho)(eta(2) - rho)
//   "gradient"         eta(1) - eta(2)
//   "sum-centered"     eta(1) + eta(2) - 2 rho
LocalFunction named_local_function(const std::string& name, double rho);

// Named test-function profiles: "bump", "gauss", "indicator".
TestFunction make_test_function(const std::string& name, double cutoff);

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a(std::string_view bytes);

// Canonical serialization used for hashing: keys sorted, no whitespace.
std::string canonical_json(const nlohmann::json& j);

// fnv1a of the canonical dump, as a fixed-width hex string.
std::string config_hash(const nlohmann::json& doc);

}  // namespace fluctuant
