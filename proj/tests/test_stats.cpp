#include <doctest.h>

#include <cmath>
#include <vector>

#include "fluctuant/errors.hpp"
#include "fluctuant/rng.hpp"
#include "fluctuant/stats.hpp"

using namespace fluctuant;

TEST_CASE("jackknife mean matches closed form on small data") {
  // xs = {1,2,3,4}: mean 2.5, se of mean = sd/sqrt(n) = sqrt(5/3)/2.
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const MeanCI ci = jackknife_mean(xs);
  CHECK(ci.value == doctest::Approx(2.5).epsilon(1e-15));
  // Delete-1 jackknife of the mean reproduces the classical standard error.
  CHECK(ci.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(ci.lo < 2.5);
  CHECK(ci.hi > 2.5);
}

TEST_CASE("jackknife variance covers the truth on gaussian samples") {
  RandomSource rng(2024, 0);
  const int n = 4000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = 3.0 + 2.0 * rng.normal();  // Var = 4
  const MeanCI ci = jackknife_variance(xs);
  CHECK(ci.value == doctest::Approx(4.0).epsilon(0.1));
  CHECK(ci.lo <= 4.0);
  CHECK(ci.hi >= 4.0);
  const MeanCI m2 = jackknife_mean_sq(xs);
  CHECK(m2.value == doctest::Approx(13.0).epsilon(0.05));  // E[X^2] = 9 + 4
}

TEST_CASE("scaling_exponent recovers a planted power law") {
  std::vector<double> x, y;
  for (int i = 1; i <= 8; ++i) {
    x.push_back(i);
    y.push_back(2.5 * std::pow(i, -1.5));
  }
  const SlopeFit fit = scaling_exponent(x, y);
  CHECK(fit.slope == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(2.5)).epsilon(1e-12));
  CHECK(fit.se_slope == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("scaling_exponent validates input") {
  std::vector<double> x{1, 2, 3, 4}, bad{1, -2, 3, 4};
  CHECK_THROWS_AS(scaling_exponent(x, bad), NonPositive);
  std::vector<double> shortx{1, 2, 3}, shorty{1, 2, 3};
  CHECK_THROWS_AS(scaling_exponent(shortx, shorty), Error);
}

TEST_CASE("hurst_exponent halves the slope") {
  std::vector<double> t, v;
  for (int i = 0; i < 6; ++i) {
    const double ti = std::ldexp(1.0, i);  // dyadic grid
    t.push_back(ti);
    v.push_back(0.7 * std::pow(ti, 1.5));
  }
  const HurstFit h = hurst_exponent(t, v);
  CHECK(h.h == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(h.se == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("anderson_darling accepts gaussian, rejects exponential") {
  RandomSource rng(7, 3);
  std::vector<double> gauss(800), expo(800);
  for (auto& x : gauss) x = 1.0 + 0.5 * rng.normal();
  for (auto& x : expo) x = rng.exponential(1.0);
  CHECK(anderson_darling_pvalue(gauss) > 0.01);
  CHECK(anderson_darling_pvalue(expo) < 1e-6);
}

TEST_CASE("anderson_darling p-value is continuous across thresholds") {
  // The piecewise map must not jump at the break points; probe by direct
  // evaluation of the two branches at each threshold.
  auto left = [](double a) {
    return 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
  };
  auto mid1 = [](double a) {
    return 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  };
  auto mid2 = [](double a) {
    return std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  };
  auto right = [](double a) {
    return std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
  };
  CHECK(std::abs(left(0.2) - mid1(0.2)) < 0.02);
  CHECK(std::abs(mid1(0.34) - mid2(0.34)) < 0.02);
  CHECK(std::abs(mid2(0.6) - right(0.6)) < 0.02);
}

TEST_CASE("bound_ratio_check passes a true bound with stable constant") {
  // lhs = 3.2 * bound everywhere: one constant works, ratio spread is 1.
  std::vector<double> lhs, bound;
  for (int g = 2; g <= 2048; g *= 2) {
    bound.push_back(1.0 / g + 0.01);
    lhs.push_back(3.2 * bound.back());
  }
  const BoundRatio br = bound_ratio_check(lhs, bound);
  CHECK(br.pass);
  CHECK(br.max_ratio == doctest::Approx(3.2).epsilon(1e-12));
  CHECK(br.max_ratio / br.min_ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bound_ratio_check fails a logarithmically drifting violation") {
  // lhs = bound * log2(g) over g = 2..2^11: ratio drifts 1..11, spread > 10,
  // so no single constant fits the grid.
  std::vector<double> lhs, bound;
  for (int k = 1; k <= 11; ++k) {
    bound.push_back(0.5);
    lhs.push_back(0.5 * k);
  }
  const BoundRatio br = bound_ratio_check(lhs, bound);
  CHECK_FALSE(br.pass);
  CHECK(br.max_ratio / br.min_ratio == doctest::Approx(11.0).epsilon(1e-12));
}
