#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fluctuant/dynamics.hpp"
#include "fluctuant/lattice.hpp"
#include "fluctuant/local_function.hpp"
#include "fluctuant/sum_tree.hpp"

namespace fluctuant {

// A field sampled along a trajectory. The driver integrates the observer's
// piecewise-constant value exactly between events: advance(dt) accrues the
// current cached value over a sub-interval during which no event occurred;
// on_event then refreshes the cache from the post-event configuration (the
// two toggled sites are supplied so updates stay local). resync() recomputes
// every cache from scratch and reports how far the incremental state had
// drifted, so long runs can bound float error.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void attach(const Configuration& cfg) = 0;
  virtual void on_event(const Configuration& cfg, int a, int b) = 0;
  virtual void advance(double dt) = 0;
  virtual double report() const = 0;
  virtual double resync(const Configuration& cfg) = 0;
};

// Time integral of a local observable anchored at the origin, optionally
// corrected by functions of nearby box counts:
//   value(eta) = f(eta) + sum_j table_j[ m_j(eta) ],
// where m_j is the particle count on sites 1..len_j. report() returns
// scale * integral of value over microscopic time. Covers occupation-time
// and additive functionals (f centered, no boxes), block comparisons
// (f plus a signed box table), and box occupation fields (no f).
class AdditiveObserver : public Observer {
 public:
  struct BoxTable {
    int len;                    // box is sites 1..len
    std::vector<double> table;  // len+1 entries, index = particle count
  };

  // anchor translates the whole observable: f reads sites anchor+1 ..
  // anchor+window (wrapped) and box j counts sites anchor+1 .. anchor+len_j.
  AdditiveObserver(std::optional<LocalFunction> f, std::vector<BoxTable> boxes,
                   double report_scale, int anchor = 0);

  void attach(const Configuration& cfg) override;
  void on_event(const Configuration& cfg, int a, int b) override;
  void advance(double dt) override;
  double report() const override;
  double resync(const Configuration& cfg) override;

  double current_value() const;

 private:
  std::optional<LocalFunction> f_;
  std::uint32_t support_mask_ = 0;  // bit s-1 <=> site anchor+s in supp
  int window_ = 0;
  int anchor_ = 0;
  std::vector<BoxTable> boxes_;
  double scale_;
  double fval_ = 0.0;
  std::vector<int> counts_;
  KahanAccumulator acc_;
};

// Instantaneous density fluctuation field: report() returns
//   scale * sum_x (eta(x) - rho) * weight[x].
// advance() accrues nothing; the value is read at checkpoints.
class InstantFieldObserver : public Observer {
 public:
  InstantFieldObserver(std::vector<double> weights, double rho, double scale);

  void attach(const Configuration& cfg) override;
  void on_event(const Configuration& cfg, int a, int b) override;
  void advance(double) override {}
  double report() const override;
  double resync(const Configuration& cfg) override;

 private:
  std::vector<double> weights_;
  double rho_, scale_;
  double sum_ = 0.0;
};

// Time integral of the weighted translate sum
//   S(eta) = sum_x (f(tau_x eta) - phi_f(rho)) * weight[x].
// Each event re-evaluates only the translates whose window covers a toggled
// site. report() returns scale * integral S dt.
class TranslateSumObserver : public Observer {
 public:
  TranslateSumObserver(const LocalFunction& f, double rho,
                       std::vector<double> weights, double scale);

  void attach(const Configuration& cfg) override;
  void on_event(const Configuration& cfg, int a, int b) override;
  void advance(double dt) override;
  double report() const override;
  double resync(const Configuration& cfg) override;

 private:
  void refresh_base(const Configuration& cfg, int x);

  LocalFunction f_;
  double phi_rho_;
  std::vector<double> weights_;
  double scale_;
  std::vector<double> per_base_;
  double sum_ = 0.0;
  KahanAccumulator acc_;
};

// Time integral of the weighted quadratic block field
//   S(eta) = sum_x weight[x] * ((m_x/L - rho)^2 - chi(rho)/L),
// with m_x the count on sites x+1..x+L. Events update only the boxes whose
// count changes: the symmetric difference of the ranges covering the two
// toggled sites (2*d boxes for a displacement-d move).
class QuadraticFieldObserver : public Observer {
 public:
  QuadraticFieldObserver(int box_len, double rho, std::vector<double> weights,
                         double scale);

  void attach(const Configuration& cfg) override;
  void on_event(const Configuration& cfg, int a, int b) override;
  void advance(double dt) override;
  double report() const override;
  double resync(const Configuration& cfg) override;

 private:
  double q(int m) const {
    const double d = static_cast<double>(m) / len_ - rho_;
    return d * d - chi_ / len_;
  }
  void bump(int x, int delta);  // m_x += delta, S updated

  int len_;
  double rho_, chi_;
  std::vector<double> weights_;
  double scale_;
  std::vector<int> counts_;
  double sum_ = 0.0;
  KahanAccumulator acc_;
};

struct EvolveResult {
  std::vector<double> times;                // checkpoint times, microscopic
  std::vector<std::vector<double>> values;  // [observer][checkpoint]
  double max_resync_drift = 0.0;
  std::uint64_t events = 0;
};

// Drive the simulation until the last checkpoint, reporting every observer
// at every checkpoint time exactly (values are integrated to the checkpoint,
// not to the straddling event). Checkpoints are microscopic times, strictly
// increasing, all beyond the current clock. Observers are resynced every
// resync_period events; the worst drift is reported.
EvolveResult evolve(SimulationState& st, const std::vector<double>& checkpoints,
                    const std::vector<Observer*>& observers,
                    std::uint64_t resync_period = 1'000'000);

// Smooth compactly supported test profiles on the macroscopic line.
class TestFunction {
 public:
  enum class Kind { Bump, GaussTruncated, IndicatorMollified };

  TestFunction(Kind kind, double cutoff);

  double operator()(double u) const;
  double cutoff() const { return cutoff_; }

  // weight vector u(x/n) over ring sites, x represented in [-N/2, N/2).
  std::vector<double> weights(int n, int ring_sites) const;

  // n^{-1} sum_x u(x/n)^2 over the same representation.
  double discrete_l2(int n, int ring_sites) const;

 private:
  Kind kind_;
  double cutoff_;
};

}  // namespace fluctuant
