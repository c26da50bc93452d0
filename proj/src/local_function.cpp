#include "fluctuant/local_function.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>

#include "fluctuant/errors.hpp"

namespace fluctuant {

namespace {

constexpr int kMaxWindow = 20;

Rational rational_pow(const Rational& x, int n) {
  Rational v = 1, base = x;
  for (int e = n; e > 0; e >>= 1) {
    if (e & 1) v *= base;
    if (e > 1) base *= base;
  }
  return v;
}

}  // namespace

LocalFunction::LocalFunction(
    const std::vector<std::pair<std::vector<int>, double>>& terms) {
  int min_site = std::numeric_limits<int>::max();
  for (const auto& [sites, coeff] : terms) {
    (void)coeff;
    for (int s : sites) min_site = std::min(min_site, s);
  }
  const int shift = (min_site == std::numeric_limits<int>::max()) ? 0 : 1 - min_site;
  for (const auto& [sites, coeff] : terms) {
    std::uint32_t mask = 0;
    for (int s : sites) {
      const int t = s + shift;  // t >= 1
      if (t > kMaxWindow)
        throw Error("local function window exceeds " + std::to_string(kMaxWindow) +
                    " sites");
      mask |= std::uint32_t{1} << (t - 1);
    }
    terms_.push_back({mask, coeff});
  }
  finalize();
}

LocalFunction LocalFunction::constant(double c) {
  return LocalFunction({{std::vector<int>{}, c}});
}

LocalFunction LocalFunction::monomial(const std::vector<int>& sites) {
  return LocalFunction({{sites, 1.0}});
}

void LocalFunction::finalize() {
  std::map<std::uint32_t, double> merged;
  for (const Term& t : terms_) merged[t.mask] += t.coeff;
  terms_.clear();
  window_ = 0;
  for (const auto& [mask, coeff] : merged) {
    if (coeff == 0.0 && mask != 0) continue;
    terms_.push_back({mask, coeff});
    if (mask != 0) window_ = std::max(window_, 32 - std::countl_zero(mask));
  }
  phi_.assign(static_cast<std::size_t>(window_) + 1, Rational(0));
  for (const Term& t : terms_)
    phi_[static_cast<std::size_t>(std::popcount(t.mask))] += Rational(t.coeff);
}

std::vector<int> LocalFunction::support() const {
  std::uint32_t all = 0;
  for (const Term& t : terms_) all |= t.mask;
  std::vector<int> out;
  for (std::uint32_t m = all; m; m &= m - 1)
    out.push_back(std::countr_zero(m) + 1);
  return out;
}

double LocalFunction::eval(const Configuration& cfg, int base) const {
  double v = 0.0;
  for (const Term& t : terms_) {
    bool all = true;
    for (std::uint32_t m = t.mask; m; m &= m - 1) {
      if (!cfg.get(base + std::countr_zero(m) + 1)) {
        all = false;
        break;
      }
    }
    if (all) v += t.coeff;
  }
  return v;
}

double LocalFunction::eval_bits(std::uint64_t bits) const {
  double v = 0.0;
  for (const Term& t : terms_)
    if ((bits & t.mask) == t.mask) v += t.coeff;
  return v;
}

double LocalFunction::phi(double beta) const {
  // Horner, highest degree first.
  double v = 0.0;
  for (std::size_t k = phi_.size(); k-- > 0;)
    v = v * beta + phi_[k].convert_to<double>();
  return v;
}

double LocalFunction::phi_prime(double beta) const {
  double v = 0.0;
  for (std::size_t k = phi_.size(); k-- > 1;)
    v = v * beta + static_cast<double>(k) * phi_[k].convert_to<double>();
  return v;
}

double LocalFunction::phi_second(double beta) const {
  double v = 0.0;
  for (std::size_t k = phi_.size(); k-- > 2;)
    v = v * beta + static_cast<double>(k * (k - 1)) * phi_[k].convert_to<double>();
  return v;
}

Rational LocalFunction::phi_exact(const Rational& beta) const {
  Rational v = 0;
  for (std::size_t k = phi_.size(); k-- > 0;) v = v * beta + phi_[k];
  return v;
}

Rational LocalFunction::phi_prime_exact(const Rational& beta) const {
  Rational v = 0;
  for (std::size_t k = phi_.size(); k-- > 1;)
    v = v * beta + Rational(static_cast<unsigned>(k)) * phi_[k];
  return v;
}

Rational LocalFunction::phi_second_exact(const Rational& beta) const {
  Rational v = 0;
  for (std::size_t k = phi_.size(); k-- > 2;)
    v = v * beta + Rational(static_cast<unsigned>(k * (k - 1))) * phi_[k];
  return v;
}

Rational LocalFunction::psi_exact(int ell, int m) const {
  if (window_ > ell) throw Error("psi: support exceeds box");
  if (m < 0 || m > ell) throw Error("psi: particle count out of range");
  Rational v = 0;
  Rational fall(1);  // prod_{j<k} (m-j)/(ell-j)
  for (std::size_t k = 0; k < phi_.size(); ++k) {
    if (k > 0) fall *= Rational(m - static_cast<int>(k) + 1, ell - static_cast<int>(k) + 1);
    if (phi_[k] != 0) v += phi_[k] * fall;
  }
  return v;
}

double LocalFunction::psi(int ell, int m) const {
  if (window_ > ell) throw Error("psi: support exceeds box");
  if (m < 0 || m > ell) throw Error("psi: particle count out of range");
  long double v = 0.0L, fall = 1.0L;
  for (std::size_t k = 0; k < phi_.size(); ++k) {
    if (k > 0)
      fall *= static_cast<long double>(m - static_cast<int>(k) + 1) /
              static_cast<long double>(ell - static_cast<int>(k) + 1);
    v += phi_[k].convert_to<long double>() * fall;
  }
  return static_cast<double>(v);
}

std::vector<double> LocalFunction::psi_table(int ell) const {
  std::vector<double> t(static_cast<std::size_t>(ell) + 1);
  for (int m = 0; m <= ell; ++m) t[static_cast<std::size_t>(m)] = psi(ell, m);
  return t;
}

LocalFunction LocalFunction::centered(double rho) const {
  LocalFunction g = *this;
  const double c = phi(rho);
  bool found = false;
  for (Term& t : g.terms_)
    if (t.mask == 0) {
      t.coeff -= c;
      found = true;
    }
  if (!found) g.terms_.push_back({0u, -c});
  g.finalize();
  return g;
}

LocalFunction LocalFunction::times(const LocalFunction& g) const {
  LocalFunction out;
  for (const Term& a : terms_)
    for (const Term& b : g.terms_)
      out.terms_.push_back({a.mask | b.mask, a.coeff * b.coeff});
  out.finalize();
  return out;
}

Rational LocalFunction::variance_exact(const Rational& rho) const {
  Rational e1 = 0, e2 = 0;
  for (const Term& a : terms_) {
    e1 += Rational(a.coeff) * rational_pow(rho, std::popcount(a.mask));
    for (const Term& b : terms_) {
      const int u = std::popcount(a.mask | b.mask);
      e2 += Rational(a.coeff) * Rational(b.coeff) * rational_pow(rho, u);
    }
  }
  return e2 - e1 * e1;
}

double LocalFunction::variance(double rho) const {
  return variance_exact(Rational(rho)).convert_to<double>();
}

Rational ensembles_residual_exact(const LocalFunction& f, int ell) {
  Rational best = 0;
  const Rational two_ell(2 * ell);
  for (int m = 0; m <= ell; ++m) {
    const Rational beta(m, ell);
    const Rational r = f.psi_exact(ell, m) - f.phi_exact(beta) +
                       chi_exact(beta) * f.phi_second_exact(beta) / two_ell;
    const Rational a = boost::multiprecision::abs(r);
    if (a > best) best = a;
  }
  return best;
}

double ensembles_residual(const LocalFunction& f, int ell) {
  return ensembles_residual_exact(f, ell).convert_to<double>();
}

double psi_variance(const LocalFunction& f, int ell, double rho) {
  if (f.window() > ell) throw Error("psi_variance: support exceeds box");
  if (rho <= 0.0 || rho >= 1.0) {
    if (rho == 0.0 || rho == 1.0) return 0.0;
    throw Error("psi_variance: density outside [0,1]");
  }
  if (ell <= 64) {
    const Rational p(rho);
    const Rational q = 1 - p;
    Rational e1 = 0, e2 = 0;
    // weight(m) updated multiplicatively: w(m+1)/w(m) = (ell-m)/(m+1) * p/q.
    Rational w = rational_pow(q, ell);
    for (int m = 0; m <= ell; ++m) {
      if (m > 0) w *= Rational(ell - m + 1, m) * p / q;
      const Rational ps = f.psi_exact(ell, m);
      e1 += w * ps;
      e2 += w * ps * ps;
    }
    return (e2 - e1 * e1).convert_to<double>();
  }
  const long double lp = std::log(static_cast<long double>(rho));
  const long double lq = std::log(static_cast<long double>(1.0 - rho));
  const long double lg_ell = std::lgamma(static_cast<long double>(ell) + 1.0L);
  long double e1 = 0.0L, e2 = 0.0L;
  for (int m = 0; m <= ell; ++m) {
    const long double logw = lg_ell - std::lgamma(static_cast<long double>(m) + 1.0L) -
                             std::lgamma(static_cast<long double>(ell - m) + 1.0L) +
                             m * lp + (ell - m) * lq;
    const long double w = std::exp(logw);
    const long double ps = static_cast<long double>(f.psi(ell, m));
    e1 += w * ps;
    e2 += w * ps * ps;
  }
  return static_cast<double>(e2 - e1 * e1);
}

}  // namespace fluctuant
