#include "fluctuant/ou.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "fluctuant/errors.hpp"

namespace fluctuant {

namespace {

using Cx = std::complex<double>;

// (e^z - 1 - z) / z^2, stable near z = 0 (series below |z| = 1e-2; the
// direct form there would cancel ~z^2/2 out of O(|z|) terms).
Cx expm1m_over_sq(Cx z) {
  if (std::abs(z) < 1e-2) {
    Cx sum = 0.5;  // leading term 1/2!
    Cx pow = 1.0;
    double fact = 2.0;
    for (int m = 1; m <= 10; ++m) {
      pow *= z;
      fact *= static_cast<double>(m + 2);
      sum += pow / fact;
    }
    return sum;
  }
  return (std::exp(z) - 1.0 - z) / (z * z);
}

// F(mu, s) = int_0^s (1 - e^{-mu u}) / mu du = (mu s - 1 + e^{-mu s}) / mu^2.
Cx ou_f(Cx mu, double s) {
  return s * s * expm1m_over_sq(-mu * s);
}

// G(mu, s, t) = s/mu - (e^{-mu(t-s)} - e^{-mu t}) / mu^2 for 0 <= s <= t,
// = sum_{m >= 2} (-mu)^{m-2} (t^m - (t-s)^m) / m!  as mu -> 0.
Cx ou_g(Cx mu, double s, double t) {
  if (std::abs(mu) * t < 1e-2) {
    Cx sum = 0.0;
    Cx pow = 1.0;
    double tp = t * t;
    double rp = (t - s) * (t - s);
    double fact = 2.0;
    for (int m = 2; m <= 12; ++m) {
      sum += pow * (tp - rp) / fact;
      pow *= -mu;
      tp *= t;
      rp *= t - s;
      fact *= static_cast<double>(m + 1);
    }
    return sum;
  }
  return (s * mu - std::exp(-mu * (t - s)) + std::exp(-mu * t)) / (mu * mu);
}

// E[W(s) conj(W(t))] / v for one mode, W(t) = int_0^t A_u du with
// E[A_u conj(A_w)] = v e^{-mu(u-w)} (u >= w) and E[A A] = 0.
Cx integrated_cross(Cx mu, double s, double t) {
  if (s <= t) return ou_f(mu, s) + ou_g(std::conj(mu), s, t);
  return std::conj(ou_f(mu, t) + ou_g(std::conj(mu), t, s));
}

void check_state(const SpectralOUState& st) {
  if (st.torus <= 0.0 || st.d_coef <= 0.0 || st.sigma < 0.0)
    throw NonPositive("OU state needs torus > 0, D > 0, sigma >= 0");
  if (st.cutoff < 1) throw Error("OU cutoff must be at least 1");
}

void check_resolution(const SpectralOUState& st, double eps) {
  if (eps <= 0.0) throw NonPositive("mollifier width must be positive");
  // Fewer than 16 modes across the box width leaves i_eps unresolved.
  if (static_cast<double>(st.cutoff) * eps / st.torus < 16.0)
    std::cerr << "fluctuant: warning: cutoff " << st.cutoff
              << " resolves fewer than 16 modes across eps = " << eps
              << " on torus " << st.torus << "\n";
}

double stationary_mode_variance(const SpectralOUState& st) {
  return st.sigma * st.sigma / (2.0 * st.d_coef * st.torus);
}

// Cholesky factor with a tiny relative jitter retry; the covariances here
// are PSD by construction, so only roundoff can push an eigenvalue below 0.
Eigen::MatrixXd cholesky_factor(const std::vector<std::vector<double>>& cov) {
  const int m = static_cast<int>(cov.size());
  Eigen::MatrixXd a(m, m);
  double dmax = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = cov[i][j];
    dmax = std::max(dmax, std::abs(a(i, i)));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  a.diagonal().array() += 1e-12 * std::max(dmax, 1.0);
  llt.compute(a);
  if (llt.info() != Eigen::Success)
    throw Error("covariance matrix is not positive semidefinite");
  return llt.matrixL();
}

std::vector<std::vector<double>> sample_gaussian(
    const std::vector<std::vector<double>>& cov, int paths,
    RandomSource& rng) {
  const int m = static_cast<int>(cov.size());
  const Eigen::MatrixXd lfac = cholesky_factor(cov);
  std::vector<std::vector<double>> out(paths, std::vector<double>(m));
  Eigen::VectorXd g(m);
  for (int p = 0; p < paths; ++p) {
    for (int i = 0; i < m; ++i) g(i) = rng.normal();
    const Eigen::VectorXd z = lfac * g;
    for (int i = 0; i < m; ++i) out[p][i] = z(i);
  }
  return out;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw Error("time grid is empty");
  double prev = 0.0;
  for (double t : grid) {
    if (t <= prev && !(t == 0.0 && prev == 0.0))
      throw Error("time grid must be nondecreasing and nonnegative");
    prev = t;
  }
}

std::size_t next_pow2(double x) {
  std::size_t n = 8;
  while (static_cast<double>(n) < x) n <<= 1;
  return n;
}

}  // namespace

SpectralOUState make_ou_state(double torus, int cutoff, double d_coef,
                              double sigma, double drift, RandomSource& rng) {
  SpectralOUState st;
  st.torus = torus;
  st.cutoff = cutoff;
  st.d_coef = d_coef;
  st.sigma = sigma;
  st.drift = drift;
  check_state(st);
  const double v = stationary_mode_variance(st);
  const double sd = std::sqrt(v / 2.0);
  st.modes.resize(static_cast<std::size_t>(cutoff));
  for (auto& a : st.modes) a = Cx(sd * rng.normal(), sd * rng.normal());
  return st;
}

void ou_advance(SpectralOUState& st, double dt, RandomSource& rng) {
  check_state(st);
  if (dt < 0.0) throw Error("OU step must be nonnegative");
  if (dt == 0.0) return;
  const double v = stationary_mode_variance(st);
  const double base_k = 2.0 * std::numbers::pi / st.torus;
  for (int j = 1; j <= st.cutoff; ++j) {
    const double k = base_k * static_cast<double>(j);
    const double relax = st.d_coef * k * k;
    const Cx decay = std::exp(Cx(-relax * dt, -st.drift * k * dt));
    // Exact transition: the innovation tops the variance back up to v.
    const double keep = std::exp(-2.0 * relax * dt);
    const double sd = std::sqrt(v * (1.0 - keep) / 2.0);
    Cx& a = st.modes[static_cast<std::size_t>(j - 1)];
    a = a * decay + Cx(sd * rng.normal(), sd * rng.normal());
  }
}

double ou_pairing(const SpectralOUState& st,
                  const std::vector<std::complex<double>>& u_hat) {
  if (u_hat.size() != st.modes.size())
    throw Error("u_hat must supply one coefficient per retained mode");
  double sum = 0.0;
  for (std::size_t i = 0; i < u_hat.size(); ++i) {
    const Cx z = st.modes[i] * std::conj(u_hat[i]);
    sum += 2.0 * z.real();
  }
  return st.torus * sum;
}

std::vector<std::complex<double>> box_mollifier_hat(double torus, int cutoff,
                                                    double eps) {
  if (torus <= 0.0 || eps <= 0.0) throw NonPositive("torus and eps must be positive");
  if (cutoff < 1) throw Error("cutoff must be at least 1");
  std::vector<Cx> out(static_cast<std::size_t>(cutoff));
  const double base_k = 2.0 * std::numbers::pi / torus;
  for (int j = 1; j <= cutoff; ++j) {
    const double ke = base_k * static_cast<double>(j) * eps;
    // (1 - e^{-i k eps}) / (i k eps), exact at every frequency
    out[static_cast<std::size_t>(j - 1)] =
        Cx(std::sin(ke) / ke, (std::cos(ke) - 1.0) / ke) / torus;
  }
  return out;
}

std::vector<std::vector<double>> z_epsilon_covariance(
    const SpectralOUState& st, double eps1, double eps2,
    const std::vector<double>& grid) {
  check_state(st);
  check_grid(grid);
  check_resolution(st, eps1);
  if (eps2 != eps1) check_resolution(st, eps2);
  const auto h1 = box_mollifier_hat(st.torus, st.cutoff, eps1);
  const auto h2 = (eps2 == eps1)
                      ? h1
                      : box_mollifier_hat(st.torus, st.cutoff, eps2);
  const double v = stationary_mode_variance(st);
  const double base_k = 2.0 * std::numbers::pi / st.torus;
  const std::size_t m = grid.size();
  std::vector<std::vector<double>> cov(m, std::vector<double>(m, 0.0));
  const double scale = 2.0 * st.torus * st.torus * v;
  for (int j = 1; j <= st.cutoff; ++j) {
    const double k = base_k * static_cast<double>(j);
    const Cx mu(st.d_coef * k * k, st.drift * k);
    const Cx w = std::conj(h1[static_cast<std::size_t>(j - 1)]) *
                 h2[static_cast<std::size_t>(j - 1)];
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        cov[a][b] +=
            scale * (w * integrated_cross(mu, grid[a], grid[b])).real();
  }
  return cov;
}

std::vector<std::vector<double>> z_epsilon_ou(const SpectralOUState& st,
                                              double eps,
                                              const std::vector<double>& grid,
                                              int paths, RandomSource& rng) {
  if (paths < 1) throw Error("need at least one path");
  return sample_gaussian(z_epsilon_covariance(st, eps, eps, grid), paths, rng);
}

namespace {

// Shared driver: every requested width is evaluated along the same mode
// trajectory, so differences A^{eps1} - A^{eps2} are sampled with coupled
// noise. Returns one [path][checkpoint] matrix per width.
std::vector<std::vector<std::vector<double>>> quad_field_multi(
    const SpectralOUState& init, const std::vector<double>& epses,
    const TestFunction& u, const std::vector<double>& grid, int paths,
    RandomSource& rng) {
  check_state(init);
  check_grid(grid);
  for (double eps : epses) check_resolution(init, eps);
  if (paths < 1) throw Error("need at least one path");
  if (2.0 * u.cutoff() >= init.torus)
    throw Error("test profile support must fit inside the torus");

  const double torus = init.torus;
  const int cutoff = init.cutoff;
  const double eps_min = *std::min_element(epses.begin(), epses.end());
  const std::size_t fft_n = next_pow2(
      std::max(8.0 * torus / eps_min, 4.0 * static_cast<double>(cutoff)));
  const double h = torus / static_cast<double>(fft_n);

  // Quadrature weights u(x) h over the profile's support, signed coordinates.
  std::vector<std::pair<std::size_t, double>> quad;
  for (std::size_t g = 0; g < fft_n; ++g) {
    double x = static_cast<double>(g) * h;
    if (x >= torus / 2.0) x -= torus;
    if (std::abs(x) <= u.cutoff()) {
      const double w = u(x) * h;
      if (w != 0.0) quad.emplace_back(g, w);
    }
  }

  // Box-average transfer per mode and, per width, the truncated model's own
  // stationary second moment of Y(i_eps(x)); subtracting it makes every
  // sample exactly mean zero, converging to sigma^2/(2 D eps) as the cutoff
  // grows.
  const double v = stationary_mode_variance(init);
  const double base_k = 2.0 * std::numbers::pi / torus;
  const std::size_t ne = epses.size();
  std::vector<std::vector<Cx>> transfer(ne,
                                        std::vector<Cx>(
                                            static_cast<std::size_t>(cutoff)));
  std::vector<double> second_moment(ne, 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    for (int j = 1; j <= cutoff; ++j) {
      const double ke = base_k * static_cast<double>(j) * epses[e];
      const Cx tau(std::sin(ke) / ke, (std::cos(ke) - 1.0) / ke);
      transfer[e][static_cast<std::size_t>(j - 1)] = tau;
      second_moment[e] += 2.0 * v * std::norm(tau);
    }
  }

  const double dt_max = eps_min * eps_min / (16.0 * init.d_coef);
  std::vector<Cx> spec(fft_n);
  const auto integrand = [&](const SpectralOUState& st, std::size_t e) {
    std::fill(spec.begin(), spec.end(), Cx(0.0, 0.0));
    for (int j = 1; j <= cutoff; ++j) {
      const Cx z = st.modes[static_cast<std::size_t>(j - 1)] *
                   transfer[e][static_cast<std::size_t>(j - 1)];
      spec[static_cast<std::size_t>(j)] = z;
      spec[fft_n - static_cast<std::size_t>(j)] = std::conj(z);
    }
    fft_radix2(spec, /*inverse=*/true);
    double sum = 0.0;
    for (const auto& [g, w] : quad) {
      const double b = spec[g].real() * static_cast<double>(fft_n);
      sum += w * (b * b - second_moment[e]);
    }
    return sum;
  };

  std::vector<std::vector<std::vector<double>>> out(
      ne, std::vector<std::vector<double>>(
              static_cast<std::size_t>(paths),
              std::vector<double>(grid.size(), 0.0)));
  std::vector<double> i_prev(ne), acc(ne);
  for (int p = 0; p < paths; ++p) {
    SpectralOUState st = make_ou_state(torus, cutoff, init.d_coef, init.sigma,
                                       init.drift, rng);
    double t_prev = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
      i_prev[e] = integrand(st, e);
      acc[e] = 0.0;
    }
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const double span = grid[c] - t_prev;
      const int steps = std::max(1, static_cast<int>(std::ceil(span / dt_max)));
      const double dt = span / static_cast<double>(steps);
      for (int s = 0; s < steps; ++s) {
        ou_advance(st, dt, rng);
        for (std::size_t e = 0; e < ne; ++e) {
          const double i_new = integrand(st, e);
          acc[e] += 0.5 * (i_prev[e] + i_new) * dt;
          i_prev[e] = i_new;
        }
      }
      t_prev = grid[c];
      for (std::size_t e = 0; e < ne; ++e)
        out[e][static_cast<std::size_t>(p)][c] = acc[e];
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> quadratic_field_ou(
    const SpectralOUState& init, double eps, const TestFunction& u,
    const std::vector<double>& grid, int paths, RandomSource& rng) {
  return std::move(
      quad_field_multi(init, {eps}, u, grid, paths, rng).front());
}

std::vector<std::vector<double>> quadratic_field_pair(
    const SpectralOUState& init, double eps1, double eps2,
    const TestFunction& u, const std::vector<double>& grid, int paths,
    RandomSource& rng) {
  auto both = quad_field_multi(init, {eps1, eps2}, u, grid, paths, rng);
  std::vector<std::vector<double>> out = std::move(both[0]);
  out.insert(out.end(), both[1].begin(), both[1].end());
  return out;
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double variance_oracle_drift(double t, double a_prime, double chi_rho) {
  if (t < 0.0) throw NonPositive("time must be nonnegative");
  if (t == 0.0) return 0.0;
  // s = v^2 removes the 1/sqrt(s) singularity:
  //   chi sqrt(2/pi) int_0^t (t-s) e^{-a'^2 s/2} / sqrt(s) ds
  //     = 2 chi sqrt(2/pi) int_0^sqrt(t) (t - v^2) e^{-a'^2 v^2 / 2} dv.
  const double pref = 2.0 * chi_rho * std::sqrt(2.0 / std::numbers::pi);
  const double a2 = a_prime * a_prime;
  const auto f = [&](double v) {
    return (t - v * v) * std::exp(-0.5 * a2 * v * v);
  };
  const double tol = 1e-10 / std::max(1.0, std::abs(pref));
  return pref * integrate(f, 0.0, std::sqrt(t), tol);
}

double variance_oracle_fbm(double t, double d_coef, double chi_rho) {
  if (d_coef <= 0.0) throw NonPositive("diffusion coefficient must be positive");
  if (t < 0.0) throw NonPositive("time must be nonnegative");
  const double c_amp = (4.0 / 3.0) * std::sqrt(2.0 / std::numbers::pi) *
                       chi_rho / std::sqrt(2.0 * d_coef);
  return c_amp * std::pow(t, 1.5);
}

double fbm_covariance(double s, double t, double c_amp) {
  if (s < 0.0 || t < 0.0) throw NonPositive("times must be nonnegative");
  return 0.5 * c_amp *
         (std::pow(s, 1.5) + std::pow(t, 1.5) - std::pow(std::abs(t - s), 1.5));
}

std::vector<std::vector<double>> synthetic_fbm(double hurst, double c_amp,
                                               const std::vector<double>& grid,
                                               int paths, RandomSource& rng) {
  if (hurst <= 0.0 || hurst >= 1.0) throw Error("Hurst index must lie in (0, 1)");
  if (c_amp < 0.0) throw NonPositive("amplitude must be nonnegative");
  if (paths < 1) throw Error("need at least one path");
  check_grid(grid);
  if (grid.size() > 4096) throw Error("fbm grid limited to 4096 points");
  if (c_amp == 0.0)
    return std::vector<std::vector<double>>(
        static_cast<std::size_t>(paths), std::vector<double>(grid.size(), 0.0));
  const double e2 = 2.0 * hurst;
  const std::size_t m = grid.size();
  std::vector<std::vector<double>> cov(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cov[i][j] = 0.5 * c_amp *
                  (std::pow(grid[i], e2) + std::pow(grid[j], e2) -
                   std::pow(std::abs(grid[i] - grid[j]), e2));
  return sample_gaussian(cov, paths, rng);
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw Error("FFT length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const Cx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Cx w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const Cx u = a[i + j];
        const Cx t = a[i + j + len / 2] * w;
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace fluctuant
