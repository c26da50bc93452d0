#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fluctuant/errors.hpp"
#include "fluctuant/local_function.hpp"
#include "fluctuant/rng.hpp"

using fluctuant::chi_exact;
using fluctuant::ensembles_residual_exact;
using fluctuant::LocalFunction;
using fluctuant::psi_variance;
using fluctuant::RandomSource;
using fluctuant::Rational;

namespace {

// Independent oracle: conditional expectation by enumerating every
// configuration of m particles on ell sites.
Rational psi_by_enumeration(const LocalFunction& f, int ell, int m) {
  Rational sum = 0;
  long count = 0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << ell); ++bits) {
    if (std::popcount(bits) != m) continue;
    sum += Rational(f.eval_bits(bits));
    ++count;
  }
  return sum / count;
}

Rational binom(int n, int k) {
  Rational v = 1;
  for (int j = 0; j < k; ++j) v *= Rational(n - j, j + 1);
  return v;
}

}  // namespace

TEST_CASE("grand-canonical profiles of simple functions") {
  LocalFunction f({{{0}, 1.0}});
  CHECK(f.phi(0.3) == doctest::Approx(0.3).epsilon(1e-15));

  LocalFunction g({{{0, 3}, 1.0}});
  CHECK(g.phi(0.4) == doctest::Approx(0.16).epsilon(1e-15));

  // (eta(0)-1/2)(eta(1)-1/2) = eta0*eta1 - eta0/2 - eta1/2 + 1/4.
  LocalFunction h({{{0, 1}, 1.0}, {{0}, -0.5}, {{1}, -0.5}, {{}, 0.25}});
  CHECK(h.phi(0.5) == doctest::Approx(0.0));
  CHECK(h.phi_prime(0.5) == doctest::Approx(0.0));
  CHECK(h.phi_second(0.5) == doctest::Approx(2.0));
  CHECK(h.phi(0.3) == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("support is shifted to start at site 1") {
  LocalFunction f({{{-2, 5}, 1.0}});
  CHECK(f.window() == 8);  // sites 1 and 8 after the shift
  CHECK(f.support() == std::vector<int>{1, 8});
}

TEST_CASE("psi exact values on a box of four sites") {
  LocalFunction one_site({{{1}, 1.0}});
  CHECK(one_site.psi_exact(4, 2) == Rational(1, 2));

  LocalFunction pair({{{1, 2}, 1.0}});
  CHECK(pair.psi_exact(4, 2) == Rational(1, 6));
  CHECK(pair.psi_exact(4, 2) == psi_by_enumeration(pair, 4, 2));

  // Closed form for k=2: (ell/(ell-1)) * y * (y - 1/ell) at y = 1/2, ell = 4.
  const Rational closed = Rational(4, 3) * Rational(1, 2) * Rational(1, 4);
  CHECK(pair.psi_exact(4, 2) == closed);
}

TEST_CASE("psi equals enumeration for random multilinear functions") {
  RandomSource rng(17, 0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::pair<std::vector<int>, double>> terms;
    for (int t = 0; t < 4; ++t) {
      std::vector<int> sites;
      for (int s = 1; s <= 5; ++s)
        if (rng.u01() < 0.4) sites.push_back(s);
      terms.push_back({sites, std::floor(20.0 * rng.u01()) / 8.0});
    }
    LocalFunction f(terms);
    if (f.window() == 0) continue;
    const int ell = 6;
    for (int m = 0; m <= ell; ++m)
      CHECK(f.psi_exact(ell, m) == psi_by_enumeration(f, ell, m));
  }
}

TEST_CASE("psi domain errors") {
  LocalFunction f({{{1, 2, 3}, 1.0}});
  CHECK_THROWS_AS((void)f.psi_exact(2, 1), fluctuant::Error);
  CHECK_THROWS_AS((void)f.psi_exact(4, 5), fluctuant::Error);
  CHECK_THROWS_AS((void)f.psi_exact(4, -1), fluctuant::Error);
}

TEST_CASE("tower property: binomial average of psi recovers phi") {
  LocalFunction f({{{1, 2}, 1.0}, {{1}, -0.25}, {{}, 0.125}});
  for (int ell : {2, 5, 9}) {
    for (const Rational& rho : {Rational(1, 2), Rational(1, 3), Rational(7, 10)}) {
      Rational avg = 0;
      // weight = C(ell,m) rho^m (1-rho)^(ell-m), built multiplicatively.
      Rational weight_sum = 0;
      for (int m = 0; m <= ell; ++m) {
        Rational w = binom(ell, m);
        for (int j = 0; j < m; ++j) w *= rho;
        for (int j = 0; j < ell - m; ++j) w *= (1 - rho);
        avg += w * f.psi_exact(ell, m);
        weight_sum += w;
      }
      CHECK(weight_sum == Rational(1));
      CHECK(avg == f.phi_exact(rho));
    }
  }
}

TEST_CASE("psi and phi are linear in the function") {
  const LocalFunction f({{{1, 3}, 1.0}, {{2}, 0.5}});
  const LocalFunction g({{{1}, -2.0}, {{}, 1.0}});
  RandomSource rng(23, 0);
  const double a = std::floor(16 * rng.u01()) / 4.0;
  const double b = std::floor(16 * rng.u01()) / 4.0;
  std::vector<std::pair<std::vector<int>, double>> combo = {
      {{1, 3}, a}, {{2}, 0.5 * a}, {{1}, -2.0 * b}, {{}, b}};
  const LocalFunction h(combo);
  for (int m = 0; m <= 5; ++m)
    CHECK(h.psi_exact(5, m) ==
          Rational(a) * f.psi_exact(5, m) + Rational(b) * g.psi_exact(5, m));
  CHECK(h.phi_exact(Rational(2, 5)) ==
        Rational(a) * f.phi_exact(Rational(2, 5)) +
            Rational(b) * g.phi_exact(Rational(2, 5)));
}

TEST_CASE("conditioning contracts static variance") {
  const Rational rho(1, 2);
  const LocalFunction raw({{{1, 2}, 1.0}, {{2, 4}, -0.75}, {{3}, 0.5}});
  const LocalFunction f = raw.centered(0.5);
  for (int ell : {4, 6, 10, 16}) {
    const double pv = psi_variance(f, ell, 0.5);
    const double v = f.variance(0.5);
    CHECK(pv <= v + 1e-15);
  }
}

TEST_CASE("psi_variance exact spot values") {
  LocalFunction f({{{1}, 1.0}, {{}, -0.5}});
  CHECK(psi_variance(f, 10, 0.5) == doctest::Approx(0.025).epsilon(1e-15));
  LocalFunction c = LocalFunction::constant(3.0);
  CHECK(psi_variance(c, 8, 0.3) == doctest::Approx(0.0));
}

TEST_CASE("psi_variance long-double path agrees with exact rational") {
  // The implementation switches representation above ell = 64; check the
  // large-ell path against an independent exact computation at ell = 100.
  LocalFunction f({{{1, 2}, 1.0}});
  const int ell = 100;
  const Rational rho(1, 2);
  Rational e1 = 0, e2 = 0;
  for (int m = 0; m <= ell; ++m) {
    Rational w = binom(ell, m);
    for (int j = 0; j < ell; ++j) w *= Rational(1, 2);
    const Rational p = f.psi_exact(ell, m);
    e1 += w * p;
    e2 += w * p * p;
  }
  const double exact = (e2 - e1 * e1).convert_to<double>();
  const double fast = psi_variance(f, ell, 0.5);
  CHECK(std::abs(fast - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
}

TEST_CASE("psi_variance decay rates") {
  // phi'(rho) != 0: variance ~ c/ell; phi'(rho) = 0: variance ~ c/ell^2.
  LocalFunction slope({{{1, 2}, 1.0}});       // phi' = 2 rho != 0
  LocalFunction flat({{{1, 2}, 1.0}, {{1}, -0.5}, {{2}, -0.5}, {{}, 0.25}});
  double prev_s = 0, prev_f = 0;
  for (int ell : {64, 128}) {
    const double vs = psi_variance(slope.centered(0.5), ell, 0.5);
    const double vf = psi_variance(flat, ell, 0.5);
    if (prev_s > 0) {
      CHECK(prev_s / vs == doctest::Approx(2.0).epsilon(0.1));
      CHECK(prev_f / vf == doctest::Approx(4.0).epsilon(0.1));
    }
    prev_s = vs;
    prev_f = vf;
  }
}

TEST_CASE("residual of the second-order approximant") {
  LocalFunction lin({{{1}, 1.0}});
  CHECK(ensembles_residual_exact(lin, 4) == Rational(0));
  CHECK(ensembles_residual_exact(lin, 32) == Rational(0));

  LocalFunction pair({{{1, 2}, 1.0}});
  // psi - phi = -chi/(ell-1), approximant shifts by -chi/ell, residual
  // chi/(ell(ell-1)) maximized at half filling.
  CHECK(ensembles_residual_exact(pair, 4) == Rational(1, 48));
  CHECK(ensembles_residual_exact(pair, 8) == Rational(1, 224));

  // The literal first-order combination from the same primitives: at ell=4,
  // m=2 the three pinned pieces are 1/6, 1/4 and 1/16.
  const Rational spot =
      pair.psi_exact(4, 2) - pair.phi_exact(Rational(1, 2)) -
      chi_exact(Rational(1, 2)) * pair.phi_second_exact(Rational(1, 2)) / 8;
  CHECK(boost::multiprecision::abs(spot) == Rational(7, 48));
}

TEST_CASE("residual decays at the quadratic rate") {
  LocalFunction pair({{{1, 2}, 1.0}});
  double prev = 0;
  for (int ell : {8, 16, 32, 64}) {
    const double r = fluctuant::ensembles_residual(pair, ell);
    const double scaled = r * ell * ell;
    CHECK(scaled > 0.2);
    CHECK(scaled < 0.4);
    if (prev > 0) CHECK(prev / r == doctest::Approx(4.0).epsilon(0.15));
    prev = r;
  }
}

TEST_CASE("centering wipes phi at the chosen density and is idempotent") {
  LocalFunction f({{{0, 1}, 1.0}});
  LocalFunction c = f.centered(0.5);
  CHECK(c.phi(0.5) == doctest::Approx(0.0));
  bool found_const = false;
  for (const auto& t : c.terms())
    if (t.mask == 0) {
      found_const = true;
      CHECK(t.coeff == doctest::Approx(-0.25));
    }
  CHECK(found_const);
  LocalFunction cc = c.centered(0.5);
  for (std::uint64_t bits = 0; bits < 4; ++bits)
    CHECK(cc.eval_bits(bits) == doctest::Approx(c.eval_bits(bits)));

  LocalFunction g({{{0}, 1.0}});
  CHECK(g.centered(0.3).phi(0.3) == doctest::Approx(0.0));
}

TEST_CASE("product of functions multiplies pointwise") {
  LocalFunction f({{{1}, 1.0}, {{}, -0.5}});
  LocalFunction g({{{2}, 2.0}, {{1}, 1.0}});
  LocalFunction p = f.times(g);
  for (std::uint64_t bits = 0; bits < 8; ++bits)
    CHECK(p.eval_bits(bits) ==
          doctest::Approx(f.eval_bits(bits) * g.eval_bits(bits)));
  // Idempotency: eta(1)^2 = eta(1).
  LocalFunction sq = f.times(f);
  for (std::uint64_t bits = 0; bits < 2; ++bits)
    CHECK(sq.eval_bits(bits) ==
          doctest::Approx(f.eval_bits(bits) * f.eval_bits(bits)));
}

TEST_CASE("static variance from the multilinear expansion") {
  // Var(eta(1); rho) = chi(rho).
  LocalFunction f({{{1}, 1.0}});
  CHECK(f.variance(0.3) == doctest::Approx(0.21).epsilon(1e-14));
  // Var(eta(1)+eta(2)) = 2 chi by independence.
  LocalFunction s({{{1}, 1.0}, {{2}, 1.0}});
  CHECK(s.variance(0.3) == doctest::Approx(0.42).epsilon(1e-14));
}
