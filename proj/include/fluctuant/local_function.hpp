#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fluctuant/lattice.hpp"

namespace fluctuant {

using Rational = boost::multiprecision::cpp_rational;

inline double chi(double rho) { return rho * (1.0 - rho); }
inline Rational chi_exact(const Rational& rho) { return rho * (1 - rho); }

// Multilinear function of finitely many occupancy variables,
//   f(eta) = sum_A c_A prod_{s in A} eta(s),
// stored with its support shifted so the smallest referenced site is 1 (a
// translate of the input; all ensemble quantities are translation
// invariant). window() is the largest referenced site after the shift.
//
// Occupancies are idempotent (eta^2 = eta), so site sets are genuine sets and
// products of terms combine by set union.
class LocalFunction {
 public:
  struct Term {
    std::uint32_t mask;  // bit i set <=> site i+1 in A
    double coeff;
  };

  // terms: list of (site list, coefficient); sites are arbitrary ints,
  // duplicates within one site list collapse. The empty site list is the
  // constant term.
  explicit LocalFunction(
      const std::vector<std::pair<std::vector<int>, double>>& terms);

  static LocalFunction constant(double c);

  // prod_{s in sites} eta(s) with coefficient 1.
  static LocalFunction monomial(const std::vector<int>& sites);

  int window() const { return window_; }
  const std::vector<Term>& terms() const { return terms_; }

  // Distinct sites referenced (after the shift), ascending, each in [1, window].
  std::vector<int> support() const;

  // f(tau_base eta): reads sites base+1, ..., base+window of cfg.
  double eval(const Configuration& cfg, int base) const;

  // Same, on an explicit bit pattern: bit s-1 of `bits` is the occupancy of
  // site s, s = 1..window.
  double eval_bits(std::uint64_t bits) const;

  // Grand-canonical profile phi(beta) = E[f; product measure at density beta]
  // = sum_k p_k beta^k. Coefficients are exact sums of the term coefficients.
  const std::vector<Rational>& phi_coefficients() const { return phi_; }
  double phi(double beta) const;
  double phi_prime(double beta) const;
  double phi_second(double beta) const;
  Rational phi_exact(const Rational& beta) const;
  Rational phi_prime_exact(const Rational& beta) const;
  Rational phi_second_exact(const Rational& beta) const;

  // Canonical conditional expectation psi(ell, m) = E[f | m particles on
  // sites 1..ell]. Exact: termwise falling-factorial ratios. Requires
  // window <= ell, 0 <= m <= ell.
  Rational psi_exact(int ell, int m) const;
  double psi(int ell, int m) const;

  // psi(ell, m) for m = 0..ell, as doubles (observer lookup table).
  std::vector<double> psi_table(int ell) const;

  // f - phi(rho), as a new function (constant term adjusted).
  LocalFunction centered(double rho) const;

  // Pointwise product f*g (site sets union; window is the max of the two).
  LocalFunction times(const LocalFunction& g) const;

  // Static variance Var(f; product measure at density rho), exact.
  Rational variance_exact(const Rational& rho) const;
  double variance(double rho) const;

 private:
  LocalFunction() = default;
  void finalize();  // merge duplicate masks, drop zero terms, build phi_

  std::vector<Term> terms_;
  std::vector<Rational> phi_;  // phi_[k] = sum of coeffs of k-site terms
  int window_ = 0;
};

// Largest deviation of psi from its second-order grand-canonical
// approximant: max over m in {0..ell} of
//   |psi(ell,m) - phi(m/ell) + chi(m/ell) phi''(m/ell) / (2 ell)|,
// exact. Decays like 1/ell^2 for every local f.
Rational ensembles_residual_exact(const LocalFunction& f, int ell);
double ensembles_residual(const LocalFunction& f, int ell);

// Var(psi(ell, M); M ~ Binomial(ell, rho)). Exact rational arithmetic for
// ell <= 64, log-space long-double binomial weights beyond (abs error well
// under 1e-12 of the leading terms).
double psi_variance(const LocalFunction& f, int ell, double rho);

}  // namespace fluctuant
