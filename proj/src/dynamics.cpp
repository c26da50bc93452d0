#include "fluctuant/dynamics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fluctuant/errors.hpp"

namespace fluctuant {

SpeedChangeModel::SpeedChangeModel(int radius, std::vector<double> table,
                                   double eps0)
    : radius_(radius), table_(std::move(table)), eps0_(eps0) {
  if (radius_ < 0) throw Error("speed-change radius must be nonnegative");
  const std::size_t want = std::size_t{1} << (2 * radius_ + 2);
  if (table_.size() != want)
    throw Error("speed-change table size " + std::to_string(table_.size()) +
                ", expected " + std::to_string(want));
  if (!(eps0_ > 0.0) || eps0_ > 1.0)
    throw EllipticityViolated("eps0 must lie in (0, 1]");
  for (double r : table_)
    if (!(r >= eps0_) || !(r <= 1.0 / eps0_))
      throw EllipticityViolated("swap rate " + std::to_string(r) +
                                " outside [" + std::to_string(eps0_) + ", " +
                                std::to_string(1.0 / eps0_) + "]");
  // Detailed balance with respect to product measures: the rate may not
  // distinguish which of the two exchanged sites holds the particle.
  const std::uint32_t bit_a = std::uint32_t{1} << radius_;
  const std::uint32_t bit_b = std::uint32_t{1} << (radius_ + 1);
  for (std::uint32_t w = 0; w < table_.size(); ++w) {
    const bool a = w & bit_a, b = w & bit_b;
    if (a == b) continue;
    const std::uint32_t swapped = w ^ bit_a ^ bit_b;
    if (table_[w] != table_[swapped])
      throw ReversibilityViolated(
          "rate table asymmetric under exchanging the swap pair at window " +
          std::to_string(w));
  }
}

std::shared_ptr<SpeedChangeModel> SpeedChangeModel::nearest_kind(double b) {
  if (b < 0.0) throw EllipticityViolated("nearest_kind requires b >= 0");
  // Window bits for radius 1: bit0 = site x-1, bit1 = x, bit2 = x+1, bit3 = x+2.
  std::vector<double> t(16);
  for (std::uint32_t w = 0; w < 16; ++w)
    t[w] = 1.0 + b * (static_cast<double>(w & 1u) + static_cast<double>((w >> 3) & 1u));
  const double eps0 = 1.0 / (1.0 + 2.0 * b);
  return std::make_shared<SpeedChangeModel>(1, std::move(t), eps0);
}

std::shared_ptr<SpeedChangeModel> SpeedChangeModel::constant_rate(double r) {
  if (!(r > 0.0)) throw EllipticityViolated("constant swap rate must be positive");
  const double eps0 = std::min(r, 1.0 / r);
  return std::make_shared<SpeedChangeModel>(
      0, std::vector<double>{r, r, r, r}, eps0);
}

double SpeedChangeModel::leaf_rate(const Configuration& cfg,
                                   std::size_t leaf) const {
  const int x = static_cast<int>(leaf);
  if (cfg.get(x) == cfg.get(x + 1)) return 0.0;
  std::uint32_t w = 0;
  for (int i = 0; i <= 2 * radius_ + 1; ++i)
    w |= static_cast<std::uint32_t>(cfg.get(x - radius_ + i)) << i;
  return table_[w];
}

std::pair<int, int> SpeedChangeModel::apply(Configuration& cfg,
                                            std::size_t leaf) const {
  const int x = static_cast<int>(leaf);
  cfg.swap_sites(x, x + 1);
  return {cfg.wrap(x), cfg.wrap(x + 1)};
}

void SpeedChangeModel::collect_affected(int n_sites, int a, int b,
                                        std::vector<std::size_t>& out) const {
  // Bond x reads sites x-R .. x+R+1, so site s is read by bonds s-R-1 .. s+R.
  for (int s : {a, b})
    for (int x = s - radius_ - 1; x <= s + radius_; ++x) {
      int w = x % n_sites;
      if (w < 0) w += n_sites;
      out.push_back(static_cast<std::size_t>(w));
    }
}

JumpModel::JumpModel(std::vector<Entry> kernel) : kernel_(std::move(kernel)) {
  if (kernel_.empty()) throw Error("jump kernel is empty");
  for (const Entry& e : kernel_) {
    if (e.z == 0 && e.p != 0.0) throw Error("jump kernel assigns mass to z = 0");
    if (e.p < 0.0) throw Error("jump kernel has a negative probability");
    range_ = std::max(range_, std::abs(e.z));
  }
  double total = 0.0;
  for (const Entry& e : kernel_) total += e.p;
  if (std::abs(total - 1.0) > 1e-12)
    throw Error("jump kernel probabilities sum to " + std::to_string(total));
}

double JumpModel::leaf_rate(const Configuration& cfg, std::size_t leaf) const {
  const std::size_t k = kernel_.size();
  const int x = static_cast<int>(leaf / k);
  const Entry& e = kernel_[leaf % k];
  return (cfg.get(x) && !cfg.get(x + e.z)) ? e.p : 0.0;
}

std::pair<int, int> JumpModel::apply(Configuration& cfg, std::size_t leaf) const {
  const std::size_t k = kernel_.size();
  const int x = static_cast<int>(leaf / k);
  const Entry& e = kernel_[leaf % k];
  cfg.set(x, false);
  cfg.set(x + e.z, true);
  return {cfg.wrap(x), cfg.wrap(x + e.z)};
}

void JumpModel::collect_affected(int n_sites, int a, int b,
                                 std::vector<std::size_t>& out) const {
  const std::size_t k = kernel_.size();
  for (int s : {a, b}) {
    for (std::size_t j = 0; j < k; ++j) {
      // Departures from s, and jumps whose target is s.
      out.push_back(static_cast<std::size_t>(s) * k + j);
      int from = (s - kernel_[j].z) % n_sites;
      if (from < 0) from += n_sites;
      out.push_back(static_cast<std::size_t>(from) * k + j);
    }
  }
}

std::shared_ptr<JumpModel> JumpModel::adjoint() const {
  std::vector<Entry> rev = kernel_;
  for (Entry& e : rev) e.z = -e.z;
  return std::make_shared<JumpModel>(std::move(rev));
}

std::shared_ptr<JumpModel> JumpModel::symmetrized() const {
  std::vector<Entry> sym;
  for (const Entry& e : kernel_) {
    double pr = 0.0;
    for (const Entry& o : kernel_)
      if (o.z == -e.z) pr = o.p;
    sym.push_back({e.z, 0.5 * (e.p + pr)});
  }
  // Displacements present only through their negative still need an entry.
  for (const Entry& e : kernel_) {
    bool seen = false;
    for (const Entry& s : sym)
      if (s.z == -e.z) seen = true;
    if (!seen) sym.push_back({-e.z, 0.5 * e.p});
  }
  return std::make_shared<JumpModel>(std::move(sym));
}

std::shared_ptr<JumpModel> make_mean_zero(std::vector<JumpModel::Entry> kernel) {
  double mean = 0.0;
  int g = 0;
  for (const auto& e : kernel) {
    mean += static_cast<double>(e.z) * e.p;
    if (e.p > 0.0) g = std::gcd(g, std::abs(e.z));
  }
  if (std::abs(mean) > 1e-12)
    throw MeanNotZero("jump kernel has mean " + std::to_string(mean));
  if (g != 1)
    throw NotIrreducible("jump kernel support has gcd " + std::to_string(g));
  return std::make_shared<JumpModel>(std::move(kernel));
}

std::shared_ptr<JumpModel> make_wasep(double a, double gamma, int n) {
  if (gamma != 1.0 && gamma != 0.5)
    throw Error("wasep gamma must be 1 or 1/2");
  if (n < 1) throw Error("wasep scale n must be positive");
  const double a_n = a * std::pow(static_cast<double>(n), -gamma);
  if (std::abs(a_n) > 1.0)
    throw AsymmetryOutOfRange("a_n = " + std::to_string(a_n) +
                              " makes a jump probability negative");
  return std::make_shared<JumpModel>(std::vector<JumpModel::Entry>{
      {+1, 0.5 * (1.0 + a_n)}, {-1, 0.5 * (1.0 - a_n)}});
}

SimulationState::SimulationState(Configuration cfg,
                                 std::shared_ptr<const Model> model,
                                 RandomSource rng, std::uint64_t rebuild_period)
    : cfg_(std::move(cfg)),
      model_(std::move(model)),
      rng_(rng),
      tree_(model_->leaf_count(cfg_.sites())),
      rebuild_period_(rebuild_period) {
  refresh_all();
}

void SimulationState::refresh_all() {
  for (std::size_t l = 0; l < tree_.size(); ++l)
    tree_.stage(l, model_->leaf_rate(cfg_, l));
  tree_.rebuild();
}

StepResult SimulationState::step() {
  const double total = tree_.total();
  if (!(total > 0.0)) {
    StepResult r;
    r.frozen = true;
    return r;
  }
  const double dt = rng_.exponential(total);
  clock_.add(dt);
  // u01 is in (0,1], so v = total*(1-u01) lies in [0, total).
  const double v = total * (1.0 - rng_.u01());
  const std::size_t leaf = tree_.sample(v);
  const auto [a, b] = model_->apply(cfg_, leaf);
  scratch_.clear();
  model_->collect_affected(cfg_.sites(), a, b, scratch_);
  for (std::size_t l : scratch_) tree_.set(l, model_->leaf_rate(cfg_, l));
  ++events_;
  if (events_ % rebuild_period_ == 0) refresh_all();
  StepResult r;
  r.dt = dt;
  r.site_a = a;
  r.site_b = b;
  r.frozen = false;
  return r;
}

}  // namespace fluctuant
