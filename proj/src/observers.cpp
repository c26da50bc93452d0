#include "fluctuant/observers.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "fluctuant/errors.hpp"

namespace fluctuant {

AdditiveObserver::AdditiveObserver(std::optional<LocalFunction> f,
                                   std::vector<BoxTable> boxes,
                                   double report_scale, int anchor)
    : f_(std::move(f)),
      anchor_(anchor),
      boxes_(std::move(boxes)),
      scale_(report_scale) {
  if (f_) {
    window_ = f_->window();
    for (int s : f_->support())
      support_mask_ |= std::uint32_t{1} << (s - 1);
  }
  for (const BoxTable& b : boxes_) {
    if (b.len < 1 || b.table.size() != static_cast<std::size_t>(b.len) + 1)
      throw Error("box table must have len+1 entries");
  }
  counts_.resize(boxes_.size());
}

void AdditiveObserver::attach(const Configuration& cfg) {
  fval_ = f_ ? f_->eval(cfg, anchor_) : 0.0;
  for (std::size_t j = 0; j < boxes_.size(); ++j)
    counts_[j] = cfg.box_count(anchor_, boxes_[j].len);
}

void AdditiveObserver::on_event(const Configuration& cfg, int a, int b) {
  bool f_dirty = false;
  for (int s : {a, b}) {
    // Offset of the toggled site from the anchor, wrapped: the observable
    // reads sites anchor+1 .. anchor+len.
    const int off = cfg.wrap(s - anchor_);
    if (off >= 1 && off <= window_ && ((support_mask_ >> (off - 1)) & 1u))
      f_dirty = true;
    const int delta = cfg.get(s) ? 1 : -1;
    for (std::size_t j = 0; j < boxes_.size(); ++j)
      if (off >= 1 && off <= boxes_[j].len) counts_[j] += delta;
  }
  if (f_dirty) fval_ = f_->eval(cfg, anchor_);
}

double AdditiveObserver::current_value() const {
  double v = fval_;
  for (std::size_t j = 0; j < boxes_.size(); ++j)
    v += boxes_[j].table[static_cast<std::size_t>(counts_[j])];
  return v;
}

void AdditiveObserver::advance(double dt) { acc_.add(current_value() * dt); }

double AdditiveObserver::report() const { return scale_ * acc_.value(); }

double AdditiveObserver::resync(const Configuration& cfg) {
  double drift = 0.0;
  const double f_fresh = f_ ? f_->eval(cfg, anchor_) : 0.0;
  drift = std::max(drift, std::abs(f_fresh - fval_));
  fval_ = f_fresh;
  for (std::size_t j = 0; j < boxes_.size(); ++j) {
    const int fresh = cfg.box_count(anchor_, boxes_[j].len);
    drift = std::max(drift, static_cast<double>(std::abs(fresh - counts_[j])));
    counts_[j] = fresh;
  }
  return drift;
}

InstantFieldObserver::InstantFieldObserver(std::vector<double> weights,
                                           double rho, double scale)
    : weights_(std::move(weights)), rho_(rho), scale_(scale) {}

void InstantFieldObserver::attach(const Configuration& cfg) {
  sum_ = 0.0;
  for (int x = 0; x < cfg.sites(); ++x)
    sum_ += (static_cast<double>(cfg.get(x)) - rho_) *
            weights_[static_cast<std::size_t>(x)];
}

void InstantFieldObserver::on_event(const Configuration& cfg, int a, int b) {
  for (int s : {a, b}) {
    const double delta = cfg.get(s) ? 1.0 : -1.0;
    sum_ += delta * weights_[static_cast<std::size_t>(s)];
  }
}

double InstantFieldObserver::report() const { return scale_ * sum_; }

double InstantFieldObserver::resync(const Configuration& cfg) {
  const double old = sum_;
  attach(cfg);
  return std::abs(sum_ - old);
}

TranslateSumObserver::TranslateSumObserver(const LocalFunction& f, double rho,
                                           std::vector<double> weights,
                                           double scale)
    : f_(f), phi_rho_(f.phi(rho)), weights_(std::move(weights)), scale_(scale) {}

void TranslateSumObserver::attach(const Configuration& cfg) {
  const int n = cfg.sites();
  per_base_.assign(static_cast<std::size_t>(n), 0.0);
  sum_ = 0.0;
  for (int x = 0; x < n; ++x) {
    const double v = f_.eval(cfg, x) - phi_rho_;
    per_base_[static_cast<std::size_t>(x)] = v;
    sum_ += v * weights_[static_cast<std::size_t>(x)];
  }
}

void TranslateSumObserver::refresh_base(const Configuration& cfg, int x) {
  const int w = cfg.wrap(x);
  const double v = f_.eval(cfg, w) - phi_rho_;
  sum_ += (v - per_base_[static_cast<std::size_t>(w)]) *
          weights_[static_cast<std::size_t>(w)];
  per_base_[static_cast<std::size_t>(w)] = v;
}

void TranslateSumObserver::on_event(const Configuration& cfg, int a, int b) {
  // Base x reads sites x+1 .. x+window: toggling site s touches bases
  // s-window .. s-1. The two ranges may overlap; refreshing twice is
  // harmless (the second refresh is a no-op).
  const int w = f_.window();
  for (int s : {a, b})
    for (int x = s - w; x <= s - 1; ++x) refresh_base(cfg, x);
}

void TranslateSumObserver::advance(double dt) { acc_.add(sum_ * dt); }

double TranslateSumObserver::report() const { return scale_ * acc_.value(); }

double TranslateSumObserver::resync(const Configuration& cfg) {
  const double old = sum_;
  attach(cfg);
  return std::abs(sum_ - old);
}

QuadraticFieldObserver::QuadraticFieldObserver(int box_len, double rho,
                                               std::vector<double> weights,
                                               double scale)
    : len_(box_len),
      rho_(rho),
      chi_(chi(rho)),
      weights_(std::move(weights)),
      scale_(scale) {
  if (len_ < 2) throw Error("quadratic field box must span at least 2 sites");
}

void QuadraticFieldObserver::attach(const Configuration& cfg) {
  const int n = cfg.sites();
  if (len_ > n / 2) throw Error("quadratic field box exceeds half the ring");
  counts_.assign(static_cast<std::size_t>(n), 0);
  sum_ = 0.0;
  for (int x = 0; x < n; ++x) {
    counts_[static_cast<std::size_t>(x)] = cfg.box_count(x, len_);
    sum_ += weights_[static_cast<std::size_t>(x)] *
            q(counts_[static_cast<std::size_t>(x)]);
  }
}

void QuadraticFieldObserver::bump(int x, int delta) {
  const std::size_t i = static_cast<std::size_t>(x);
  const double before = q(counts_[i]);
  counts_[i] += delta;
  sum_ += weights_[i] * (q(counts_[i]) - before);
}

void QuadraticFieldObserver::on_event(const Configuration& cfg, int a, int b) {
  const int n = cfg.sites();
  // One toggled site gained a particle, the other lost one; boxes covering
  // both are unchanged.
  const int g = cfg.get(a) ? a : b;
  const int l = cfg.get(a) ? b : a;
  int d = g - l;
  if (d < 0) d += n;  // g = l + d mod n
  if (d <= n - d) {
    // Boxes covering g but not l: the last min(d,L) slots of [g-L, g-1];
    // boxes covering l but not g: the first min(d,L) slots of [l-L, l-1].
    const int steps = std::min(d, len_);
    const int gain0 = l + std::max(0, d - len_);
    for (int k = 0; k < steps; ++k) {
      bump(cfg.wrap(gain0 + k), +1);
      bump(cfg.wrap(l - len_ + k), -1);
    }
  } else {
    const int dd = n - d;  // l = g + dd mod n
    const int steps = std::min(dd, len_);
    const int loss0 = g + std::max(0, dd - len_);
    for (int k = 0; k < steps; ++k) {
      bump(cfg.wrap(g - len_ + k), +1);
      bump(cfg.wrap(loss0 + k), -1);
    }
  }
}

void QuadraticFieldObserver::advance(double dt) { acc_.add(sum_ * dt); }

double QuadraticFieldObserver::report() const { return scale_ * acc_.value(); }

double QuadraticFieldObserver::resync(const Configuration& cfg) {
  const double old = sum_;
  attach(cfg);
  return std::abs(sum_ - old);
}

EvolveResult evolve(SimulationState& st, const std::vector<double>& checkpoints,
                    const std::vector<Observer*>& observers,
                    std::uint64_t resync_period) {
  assert(!checkpoints.empty());
  for (std::size_t i = 0; i + 1 < checkpoints.size(); ++i)
    assert(checkpoints[i] < checkpoints[i + 1]);
  assert(checkpoints.front() > st.clock());

  EvolveResult out;
  out.times = checkpoints;
  out.values.assign(observers.size(),
                    std::vector<double>(checkpoints.size(), 0.0));

  for (Observer* o : observers) o->attach(st.config());

  double t_prev = st.clock();
  std::size_t ci = 0;
  const std::uint64_t events_at_start = st.events();

  while (ci < checkpoints.size()) {
    const StepResult r = st.step();
    const double t_event =
        r.frozen ? std::numeric_limits<double>::infinity() : st.clock();

    // Emit any checkpoints inside the quiet interval (t_prev, t_event].
    while (ci < checkpoints.size() && checkpoints[ci] <= t_event) {
      const double dt = checkpoints[ci] - t_prev;
      for (Observer* o : observers) o->advance(dt);
      t_prev = checkpoints[ci];
      for (std::size_t k = 0; k < observers.size(); ++k)
        out.values[k][ci] = observers[k]->report();
      ++ci;
    }
    if (ci == checkpoints.size() || r.frozen) break;

    for (Observer* o : observers) o->advance(t_event - t_prev);
    t_prev = t_event;
    for (Observer* o : observers) o->on_event(st.config(), r.site_a, r.site_b);

    if (resync_period > 0 && st.events() % resync_period == 0)
      for (Observer* o : observers)
        out.max_resync_drift =
            std::max(out.max_resync_drift, o->resync(st.config()));
  }

  out.events = st.events() - events_at_start;
  return out;
}

TestFunction::TestFunction(Kind kind, double cutoff)
    : kind_(kind), cutoff_(cutoff) {
  if (!(cutoff > 0.0)) throw Error("test function cutoff must be positive");
}

double TestFunction::operator()(double u) const {
  const double r = std::abs(u) / cutoff_;
  if (r >= 1.0) return 0.0;
  switch (kind_) {
    case Kind::Bump:
      // Mollifier scaled to value 1 at the origin.
      return std::exp(1.0 - 1.0 / (1.0 - r * r));
    case Kind::GaussTruncated: {
      // Standard deviation cutoff/4: the truncation jump is exp(-8).
      const double s = 4.0 * r;
      return std::exp(-0.5 * s * s);
    }
    case Kind::IndicatorMollified: {
      // 1 on |u| <= cutoff/2, smoothstep down to 0 at the cutoff.
      if (r <= 0.5) return 1.0;
      const double t = (1.0 - r) / 0.5;  // 1 at r=1/2, 0 at r=1
      return t * t * (3.0 - 2.0 * t);
    }
  }
  return 0.0;
}

std::vector<double> TestFunction::weights(int n, int ring_sites) const {
  std::vector<double> w(static_cast<std::size_t>(ring_sites));
  for (int x = 0; x < ring_sites; ++x) {
    const int signed_x = (x < ring_sites - ring_sites / 2)
                             ? x
                             : x - ring_sites;  // [-N/2, N/2)
    w[static_cast<std::size_t>(x)] =
        (*this)(static_cast<double>(signed_x) / n);
  }
  return w;
}

double TestFunction::discrete_l2(int n, int ring_sites) const {
  const std::vector<double> w = weights(n, ring_sites);
  double s = 0.0;
  for (double v : w) s += v * v;
  return s / n;
}

}  // namespace fluctuant
