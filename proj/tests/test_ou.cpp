#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "fluctuant/errors.hpp"
#include "fluctuant/observers.hpp"
#include "fluctuant/ou.hpp"
#include "fluctuant/rng.hpp"
#include "fluctuant/stats.hpp"

using namespace fluctuant;
using Cx = std::complex<double>;

namespace {

// Brute-force DFT, the oracle for the fast transform.
std::vector<Cx> naive_dft(const std::vector<Cx>& a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<Cx> out(n, Cx(0.0, 0.0));
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi *
                         static_cast<double>(k * j % n) /
                         static_cast<double>(n);
      out[k] += a[j] * Cx(std::cos(ang), std::sin(ang));
    }
  if (inverse)
    for (auto& x : out) x /= static_cast<double>(n);
  return out;
}

double var_of_column(const std::vector<std::vector<double>>& samples,
                     std::size_t col) {
  std::vector<double> xs;
  xs.reserve(samples.size());
  for (const auto& row : samples) xs.push_back(row[col]);
  return jackknife_variance(xs).value;
}

}  // namespace

TEST_CASE("radix-2 FFT matches the naive DFT and inverts exactly") {
  RandomSource rng(0x0ddf00d, 0);
  std::vector<Cx> a(64);
  for (auto& x : a) x = Cx(rng.normal(), rng.normal());

  std::vector<Cx> fast = a;
  fft_radix2(fast, false);
  const auto slow = naive_dft(a, false);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(fast[i] - slow[i]) < 1e-11);

  fft_radix2(fast, true);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(fast[i] - a[i]) < 1e-12);

  std::vector<Cx> bad(3);
  CHECK_THROWS_AS(fft_radix2(bad, false), Error);
}

TEST_CASE("drift variance oracle hits its closed-form spots") {
  // a' = 0 reduces to 2 chi sqrt(2/pi) * (2/3) t^{3/2}.
  const double spot = 4.0 / 3.0 * std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(variance_oracle_drift(1.0, 0.0, 1.0) - spot) < 1e-9);
  CHECK(std::abs(variance_oracle_drift(1.0, 0.0, 0.25) - 0.25 * spot) < 1e-9);
  CHECK(variance_oracle_drift(0.0, 1.3, 1.0) == 0.0);

  // Zero drift coincides with the self-similar oracle at D = 1/2.
  for (double t : {0.25, 1.0, 4.0})
    CHECK(variance_oracle_drift(t, 0.0, 0.37) ==
          doctest::Approx(variance_oracle_fbm(t, 0.5, 0.37)).epsilon(1e-9));

  // Drift only dampens, symmetrically in its sign.
  const double v0 = variance_oracle_drift(2.0, 0.0, 1.0);
  const double v1 = variance_oracle_drift(2.0, 0.8, 1.0);
  const double v2 = variance_oracle_drift(2.0, 1.6, 1.0);
  CHECK(v1 < v0);
  CHECK(v2 < v1);
  CHECK(variance_oracle_drift(2.0, -0.8, 1.0) ==
        doctest::Approx(v1).epsilon(1e-12));
}

TEST_CASE("drift variance oracle agrees with a brute-force Riemann sum") {
  const double t = 2.0, ap = 1.3, chi = 0.42;
  const int n = 2'000'000;
  const double top = std::sqrt(t);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = (static_cast<double>(i) + 0.5) * top / n;
    sum += (t - v * v) * std::exp(-0.5 * ap * ap * v * v);
  }
  const double brute =
      2.0 * chi * std::sqrt(2.0 / std::numbers::pi) * sum * top / n;
  CHECK(variance_oracle_drift(t, ap, chi) ==
        doctest::Approx(brute).epsilon(1e-6));
}

TEST_CASE("self-similar variance oracle scales as t^{3/2}") {
  const double c = 4.0 / 3.0 * std::sqrt(2.0 / std::numbers::pi) * 0.25;
  CHECK(variance_oracle_fbm(1.0, 0.5, 0.25) == doctest::Approx(c).epsilon(1e-12));
  CHECK(std::abs(variance_oracle_fbm(1.0, 0.5, 0.25) - 0.26596152) < 1e-8);
  CHECK(variance_oracle_fbm(4.0, 0.5, 0.25) ==
        doctest::Approx(8.0 * variance_oracle_fbm(1.0, 0.5, 0.25))
            .epsilon(1e-12));
  CHECK_THROWS_AS(variance_oracle_fbm(1.0, 0.0, 1.0), NonPositive);
}

TEST_CASE("fbm covariance formula spots") {
  CHECK(fbm_covariance(2.0, 2.0, 0.7) ==
        doctest::Approx(0.7 * std::pow(2.0, 1.5)).epsilon(1e-15));
  // (C/2)(1 + 8 - 3^{3/2}) with C = 2.
  CHECK(fbm_covariance(1.0, 4.0, 2.0) ==
        doctest::Approx(9.0 - std::pow(3.0, 1.5)).epsilon(1e-15));
  CHECK(fbm_covariance(1.0, 4.0, 2.0) == fbm_covariance(4.0, 1.0, 2.0));
}

TEST_CASE("synthetic paths reproduce the marginal variance and Hurst index") {
  RandomSource rng(0x8b5fbb1, 0);
  const double c = 0.9;
  std::vector<double> grid{0.25, 0.5, 1.0, 2.0, 4.0};
  const auto paths = synthetic_fbm(0.75, c, grid, 10'000, rng);

  // Marginal variance at t = 1 (grid index 2) is C within 2%.
  CHECK(var_of_column(paths, 2) == doctest::Approx(c).epsilon(0.02));

  // Marginals are Gaussian.
  std::vector<double> z1;
  for (const auto& row : paths) z1.push_back(row[2]);
  CHECK(anderson_darling_pvalue(z1) > 0.01);

  // Variance curve calibrates the Hurst estimator to 3/4.
  std::vector<double> vars;
  for (std::size_t i = 0; i < grid.size(); ++i)
    vars.push_back(var_of_column(paths, i));
  const HurstFit fit = hurst_exponent(grid, vars);
  CHECK(std::abs(fit.h - 0.75) < 0.02);

  // Zero amplitude degenerates to the zero path.
  const auto flat = synthetic_fbm(0.75, 0.0, grid, 3, rng);
  for (const auto& row : flat)
    for (double x : row) CHECK(x == 0.0);

  CHECK_THROWS_AS(synthetic_fbm(1.5, 1.0, grid, 2, rng), Error);
}

TEST_CASE("stationary initialization gives the white-noise pairing variance") {
  // u = sqrt(2/L) cos(k_1 x): ||u||^2 = 1, so Var Y(u) = sigma^2 / (2D) = 1.
  const double torus = 8.0;
  RandomSource rng(0xa5a5a5, 0);
  std::vector<Cx> u_hat(16, Cx(0.0, 0.0));
  u_hat[0] = Cx(1.0 / std::sqrt(2.0 * torus), 0.0);

  std::vector<double> ys;
  for (int i = 0; i < 4000; ++i) {
    const auto st = make_ou_state(torus, 16, 0.5, 1.0, 0.0, rng);
    ys.push_back(ou_pairing(st, u_hat));
  }
  const MeanCI var = jackknife_mean_sq(ys);
  CHECK(var.value == doctest::Approx(1.0).epsilon(0.05));
  CHECK(anderson_darling_pvalue(ys) > 0.01);
}

TEST_CASE("mode autocorrelation decays at rate D k^2 with drift rotation") {
  const double torus = 8.0, d = 0.5, ap = 1.0, t = 0.5;
  const double k1 = 2.0 * std::numbers::pi / torus;
  RandomSource rng(0x77cafe, 0);
  std::vector<Cx> u_hat(16, Cx(0.0, 0.0));
  u_hat[0] = Cx(1.0 / std::sqrt(2.0 * torus), 0.0);

  std::vector<double> prod;
  for (int i = 0; i < 6000; ++i) {
    auto st = make_ou_state(torus, 16, d, 1.0, ap, rng);
    const double y0 = ou_pairing(st, u_hat);
    ou_advance(st, t, rng);
    prod.push_back(y0 * ou_pairing(st, u_hat));
  }
  const MeanCI corr = jackknife_mean(prod);
  const double expected = std::exp(-d * k1 * k1 * t) * std::cos(ap * k1 * t);
  CHECK(std::abs(corr.value - expected) < 3.0 * corr.se);
  CHECK(std::abs(corr.value - expected) < 0.08);

  // Zero step is the identity.
  auto st = make_ou_state(torus, 16, d, 1.0, ap, rng);
  const auto before = st.modes;
  ou_advance(st, 0.0, rng);
  for (std::size_t j = 0; j < before.size(); ++j)
    CHECK(st.modes[j] == before[j]);
}

TEST_CASE("box mollifier coefficients satisfy Parseval") {
  const double torus = 16.0, eps = 0.5;
  const int cutoff = 8192;
  const auto hat = box_mollifier_hat(torus, cutoff, eps);
  double sum = 0.0;
  for (const auto& h : hat) sum += 2.0 * std::norm(h);
  // L sum_{j != 0} |i^_j|^2 = 1/eps - 1/L (the zero mode carries 1/L^2).
  CHECK(torus * sum == doctest::Approx(1.0 / eps - 1.0 / torus).epsilon(5e-3));
}

TEST_CASE("occupation-field variance matches the self-similar oracle") {
  // sigma^2 = 1/4, D = 1/2: Var Z_t -> 0.26596 t^{3/2} as eps -> 0.
  SpectralOUState st;
  st.torus = 64.0;
  st.cutoff = 51'200;
  st.d_coef = 0.5;
  st.sigma = 0.5;
  st.drift = 0.0;
  const double eps = 0.02;
  std::vector<double> grid{1.0, 4.0};
  const auto cov = z_epsilon_covariance(st, eps, eps, grid);

  CHECK(cov[0][0] ==
        doctest::Approx(variance_oracle_fbm(1.0, 0.5, 0.25)).epsilon(0.05));
  CHECK(cov[1][1] ==
        doctest::Approx(variance_oracle_fbm(4.0, 0.5, 0.25)).epsilon(0.05));
  // Self-similarity: t -> 4t multiplies the variance by 8, up to the
  // mollifier correction which shrinks like eps/sqrt(t).
  CHECK(cov[1][1] / cov[0][0] == doctest::Approx(8.0).epsilon(0.02));
  // Symmetric cross-covariance, positive correlation.
  CHECK(cov[0][1] == doctest::Approx(cov[1][0]).epsilon(1e-12));
  CHECK(cov[0][1] > 0.0);
}

TEST_CASE("integrated-field increments are stationary with 3/2-power growth") {
  SpectralOUState st;
  st.torus = 32.0;
  st.cutoff = 4096;
  st.d_coef = 0.5;
  st.sigma = 1.0;
  st.drift = 0.0;
  const double eps = 0.125;
  std::vector<double> grid{0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
  const auto cov = z_epsilon_covariance(st, eps, eps, grid);
  const auto inc_var = [&](std::size_t a, std::size_t b) {
    return cov[a][a] + cov[b][b] - 2.0 * cov[a][b];
  };

  // Gaps of 1/2 starting anywhere share one variance (exact stationarity).
  const double first = inc_var(1, 2);
  CHECK(inc_var(2, 3) == doctest::Approx(first).epsilon(1e-9));
  CHECK(inc_var(4, 5) == doctest::Approx(first).epsilon(1e-9));
  CHECK(inc_var(5, 6) == doctest::Approx(first).epsilon(1e-9));

  // E (Z_{s+h} - Z_s)^2 <= c h^{3/2} with a stable constant over dyadic h.
  std::vector<double> lhs{inc_var(1, 2), inc_var(2, 4), inc_var(4, 7)};
  std::vector<double> bound;
  for (double h : {0.5, 1.0, 2.0}) bound.push_back(std::pow(h, 1.5));
  const BoundRatio br = bound_ratio_check(lhs, bound);
  CHECK(br.pass);

  // Scale invariance of the second moment under t -> lambda t.
  CHECK(cov[4][4] / cov[2][2] == doctest::Approx(std::pow(2.0, 1.5)).epsilon(0.02));
  CHECK(cov[7][7] / cov[2][2] == doctest::Approx(8.0).epsilon(0.02));

  // Crude a priori bound E Z_t^2 <= chi t^2 / eps.
  const double chi = st.sigma * st.sigma;
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(cov[i][i] <= chi * grid[i] * grid[i] / eps);
}

TEST_CASE("coarse and fine mollifiers stay eps-close in mean square") {
  SpectralOUState st;
  st.torus = 32.0;
  st.cutoff = 16'384;
  st.d_coef = 0.5;
  st.sigma = 1.0;
  st.drift = 0.0;
  std::vector<double> grid{1.0};

  // E (Z^eps - Z^{eps/2})^2 <= c eps t, constant stable over a dyadic sweep.
  std::vector<double> lhs, bound;
  for (double eps : {0.8, 0.4, 0.2, 0.1}) {
    const auto va = z_epsilon_covariance(st, eps, eps, grid);
    const auto vb = z_epsilon_covariance(st, eps / 2.0, eps / 2.0, grid);
    const auto cab = z_epsilon_covariance(st, eps, eps / 2.0, grid);
    lhs.push_back(va[0][0] + vb[0][0] - 2.0 * cab[0][0]);
    bound.push_back(eps * grid[0]);
  }
  for (double d : lhs) CHECK(d > 0.0);
  CHECK(bound_ratio_check(lhs, bound).pass);
}

TEST_CASE("gaussian sampler reproduces the exact covariance") {
  SpectralOUState st;
  st.torus = 16.0;
  st.cutoff = 2048;
  st.d_coef = 0.5;
  st.sigma = 1.0;
  st.drift = 0.0;
  const double eps = 0.5;
  std::vector<double> grid{0.5, 2.0};
  const auto cov = z_epsilon_covariance(st, eps, eps, grid);

  RandomSource rng(0x5ca1ab1e, 0);
  const auto paths = z_epsilon_ou(st, eps, grid, 8000, rng);
  CHECK(var_of_column(paths, 0) == doctest::Approx(cov[0][0]).epsilon(0.08));
  CHECK(var_of_column(paths, 1) == doctest::Approx(cov[1][1]).epsilon(0.08));

  std::vector<double> z0;
  for (const auto& row : paths) z0.push_back(row[0]);
  CHECK(anderson_darling_pvalue(z0) > 0.01);
}

TEST_CASE("quadratic field is centered and contracts as widths shrink") {
  SpectralOUState st;
  st.torus = 16.0;
  st.cutoff = 512;
  st.d_coef = 0.5;
  st.sigma = 1.0;
  st.drift = 0.0;
  const TestFunction u(TestFunction::Kind::Bump, 2.0);
  std::vector<double> grid{0.5};

  RandomSource rng(0x9ad4a71c, 0);
  const auto a1 = quadratic_field_ou(st, 1.0, u, grid, 64, rng);
  std::vector<double> xs;
  for (const auto& row : a1) xs.push_back(row[0]);
  const MeanCI mean = jackknife_mean(xs);
  CHECK(mean.lo <= 0.0);
  CHECK(mean.hi >= 0.0);
  CHECK(jackknife_mean_sq(xs).value > 0.0);

  // Coupled-noise difference shrinks with the width pair.
  std::vector<double> lhs, bound;
  for (double eps : {2.0, 1.0}) {
    const auto both = quadratic_field_pair(st, eps, eps / 2.0, u, grid, 48, rng);
    std::vector<double> diff;
    for (int p = 0; p < 48; ++p)
      diff.push_back(both[static_cast<std::size_t>(p)][0] -
                     both[static_cast<std::size_t>(p) + 48][0]);
    lhs.push_back(jackknife_mean_sq(diff).value);
    bound.push_back(eps * grid[0]);
  }
  CHECK(bound_ratio_check(lhs, bound).pass);
}
