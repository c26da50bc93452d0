#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "fluctuant/lattice.hpp"
#include "fluctuant/rng.hpp"
#include "fluctuant/sum_tree.hpp"

namespace fluctuant {

// Conservative ring dynamics presented as a flat list of candidate
// transitions ("leaves"). Every transition toggles exactly two sites. A
// leaf's rate is a function of the current configuration only; leaves whose
// rate can change when given sites toggle are enumerable locally.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t leaf_count(int n_sites) const = 0;
  virtual double leaf_rate(const Configuration& cfg, std::size_t leaf) const = 0;

  // Apply the transition to cfg; returns the two sites whose occupancy
  // changed, wrapped to [0, N).
  virtual std::pair<int, int> apply(Configuration& cfg, std::size_t leaf) const = 0;

  // Append every leaf whose rate may differ after sites a and b toggled.
  // Duplicates are permitted.
  virtual void collect_affected(int n_sites, int a, int b,
                                std::vector<std::size_t>& out) const = 0;
};

// Exchange dynamics: bond (x, x+1) swaps at a rate read from a table indexed
// by the occupancy window x-R .. x+R+1 (bit i of the index is site x-R+i).
// Bits R and R+1 are the exchanged pair; reversibility with respect to every
// product measure requires the table to be symmetric under swapping them.
// Swaps of equal occupancies are suppressed (rate 0), so every executed
// event toggles both sites.
class SpeedChangeModel : public Model {
 public:
  // Validates: table size 2^(2R+2); entries within [eps0, 1/eps0]
  // (EllipticityViolated); symmetry under exchanging bits R, R+1
  // (ReversibilityViolated).
  SpeedChangeModel(int radius, std::vector<double> table, double eps0);

  // r = 1 + b*(eta(x-1) + eta(x+2)) for bond (x, x+1); requires b >= 0.
  static std::shared_ptr<SpeedChangeModel> nearest_kind(double b);

  // Constant swap rate r.
  static std::shared_ptr<SpeedChangeModel> constant_rate(double r);

  std::size_t leaf_count(int n_sites) const override {
    return static_cast<std::size_t>(n_sites);
  }
  double leaf_rate(const Configuration& cfg, std::size_t leaf) const override;
  std::pair<int, int> apply(Configuration& cfg, std::size_t leaf) const override;
  void collect_affected(int n_sites, int a, int b,
                        std::vector<std::size_t>& out) const override;

  int radius() const { return radius_; }
  double eps0() const { return eps0_; }
  const std::vector<double>& table() const { return table_; }

 private:
  int radius_;
  std::vector<double> table_;
  double eps0_;
};

// Directed-jump exclusion: a particle at x hops to the empty site x+z at
// rate p(z). Leaf (x, j) is the jump from x by the j-th kernel displacement.
class JumpModel : public Model {
 public:
  struct Entry {
    int z;
    double p;
  };

  explicit JumpModel(std::vector<Entry> kernel);

  std::size_t leaf_count(int n_sites) const override {
    return static_cast<std::size_t>(n_sites) * kernel_.size();
  }
  double leaf_rate(const Configuration& cfg, std::size_t leaf) const override;
  std::pair<int, int> apply(Configuration& cfg, std::size_t leaf) const override;
  void collect_affected(int n_sites, int a, int b,
                        std::vector<std::size_t>& out) const override;

  const std::vector<Entry>& kernel() const { return kernel_; }
  int range() const { return range_; }

  // Time-reversed kernel p*(z) = p(-z).
  std::shared_ptr<JumpModel> adjoint() const;

  // Symmetric part p_s(z) = (p(z) + p(-z)) / 2.
  std::shared_ptr<JumpModel> symmetrized() const;

 private:
  std::vector<Entry> kernel_;
  int range_ = 0;
};

// Mean-zero exclusion: validates p(0) absent, sum p = 1, sum z p(z) = 0
// (MeanNotZero), gcd of |support| = 1 (NotIrreducible).
std::shared_ptr<JumpModel> make_mean_zero(std::vector<JumpModel::Entry> kernel);

// Weakly asymmetric simple exclusion at scale n: p(+1) = (1 + a_n)/2,
// p(-1) = (1 - a_n)/2 with a_n = a * n^-gamma, gamma in {1, 1/2}.
// |a_n| > 1 raises AsymmetryOutOfRange.
std::shared_ptr<JumpModel> make_wasep(double a, double gamma, int n);

struct StepResult {
  double dt = std::numeric_limits<double>::infinity();
  int site_a = -1;
  int site_b = -1;
  bool frozen = false;
};

// Rejection-free event loop: total rate and leaf selection via a sum tree
// (O(log N) per event), exponential waiting times by inversion, compensated
// clock. The tree is rebuilt from scratch every rebuild_period events so
// float drift in internal nodes cannot accumulate over long runs.
class SimulationState {
 public:
  SimulationState(Configuration cfg, std::shared_ptr<const Model> model,
                  RandomSource rng, std::uint64_t rebuild_period = 1'000'000);

  StepResult step();

  const Configuration& config() const { return cfg_; }
  const Model& model() const { return *model_; }
  double clock() const { return clock_.value(); }
  std::uint64_t events() const { return events_; }
  double total_rate() const { return tree_.total(); }
  std::size_t leaf_count() const { return tree_.size(); }
  double leaf_rate_cached(std::size_t leaf) const { return tree_.leaf(leaf); }
  double leaf_rate_fresh(std::size_t leaf) const {
    return model_->leaf_rate(cfg_, leaf);
  }
  RandomSource& rng() { return rng_; }

  // Recompute every leaf rate from the configuration.
  void refresh_all();

 private:
  Configuration cfg_;
  std::shared_ptr<const Model> model_;
  RandomSource rng_;
  SumTree tree_;
  KahanAccumulator clock_;
  std::uint64_t events_ = 0;
  std::uint64_t rebuild_period_;
  std::vector<std::size_t> scratch_;
};

}  // namespace fluctuant
