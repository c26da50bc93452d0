#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "fluctuant/observers.hpp"
#include "fluctuant/rng.hpp"

namespace fluctuant {

// Spectral representation of the conservative Ornstein-Uhlenbeck field on a
// torus of length `torus`: independent complex amplitudes for wavenumbers
// k_j = 2 pi j / torus, j = 1..cutoff (negative modes are conjugates, the
// zero mode vanishes identically). Mode j relaxes at rate mu_j =
// d_coef k^2 + i drift k and carries stationary variance
// sigma^2 / (2 d_coef torus).
struct SpectralOUState {
  double torus = 64.0;
  int cutoff = 4096;
  double d_coef = 0.5;
  double sigma = 0.5;
  double drift = 0.0;
  std::vector<std::complex<double>> modes;  // j = 1..cutoff
};

// Stationary initialization: every mode a proper complex Gaussian.
SpectralOUState make_ou_state(double torus, int cutoff, double d_coef,
                              double sigma, double drift, RandomSource& rng);

// One exact Gaussian transition of every mode over dt (no Euler error).
void ou_advance(SpectralOUState& st, double dt, RandomSource& rng);

// Y(u) for a test profile given by Fourier coefficients u_hat[j-1] = u^_j,
// j = 1..cutoff (u real, so negative modes pair up as conjugates).
double ou_pairing(const SpectralOUState& st,
                  const std::vector<std::complex<double>>& u_hat);

// Fourier coefficients of the box mollifier i_eps = eps^{-1} 1_[0, eps),
// j = 1..cutoff.
std::vector<std::complex<double>> box_mollifier_hat(double torus, int cutoff,
                                                    double eps);

// Exact covariance E[Z_s^{eps1} Z_t^{eps2}] of the integrated mollified
// field Z_t^eps = int_0^t Y_s(i_eps) ds on a time grid; entry (i, j) pairs
// grid[i] with grid[j]. Closed-form per-mode integration, no quadrature.
std::vector<std::vector<double>> z_epsilon_covariance(
    const SpectralOUState& st, double eps1, double eps2,
    const std::vector<double>& grid);

// Gaussian samples of Z^eps on the grid via Cholesky of the exact
// covariance: result[path][i] = Z_{grid[i]}.
std::vector<std::vector<double>> z_epsilon_ou(const SpectralOUState& st,
                                              double eps,
                                              const std::vector<double>& grid,
                                              int paths, RandomSource& rng);

// Sample paths of the quadratic field
//   A_t^eps(u) = int_0^t int u(x) { Y_s(i_eps(x))^2 - m_K } dx ds,
// with m_K the truncated model's own stationary second moment of Y(i_eps)
// (the sigma^2/(2 d eps) subtraction at finite cutoff), so the samples are
// mean zero at stationarity by construction. Spatial synthesis by FFT on a
// grid with spacing <= eps/8, trapezoidal time integration with
// dt <= eps^2 / (16 d_coef). result[path][i] = A at grid[i].
std::vector<std::vector<double>> quadratic_field_ou(
    const SpectralOUState& init, double eps, const TestFunction& u,
    const std::vector<double>& grid, int paths, RandomSource& rng);

// The two quadratic fields A^{eps1}, A^{eps2} evaluated along the SAME mode
// trajectories, for contracting-difference checks; result[i] pairs with
// result[i + paths] path by path.
std::vector<std::vector<double>> quadratic_field_pair(
    const SpectralOUState& init, double eps1, double eps2,
    const TestFunction& u, const std::vector<double>& grid, int paths,
    RandomSource& rng);

// chi sqrt(2/pi) int_0^t (t-s) e^{-a'^2 s / 2} / sqrt(s) ds by adaptive
// quadrature after s = v^2 (absolute tolerance 1e-10).
double variance_oracle_drift(double t, double a_prime, double chi_rho);

// C(D, chi) t^{3/2} with C = (4/3) sqrt(2/pi) chi / sqrt(2D).
double variance_oracle_fbm(double t, double d_coef, double chi_rho);

// (C/2) (s^{3/2} + t^{3/2} - |t-s|^{3/2}).
double fbm_covariance(double s, double t, double c_amp);

// Exact Gaussian paths with covariance (C/2)(s^{2H}+t^{2H}-|t-s|^{2H}) via
// Cholesky; grid size <= 4096. result[path][i] = Z_{grid[i]}.
std::vector<std::vector<double>> synthetic_fbm(double hurst, double c_amp,
                                               const std::vector<double>& grid,
                                               int paths, RandomSource& rng);

// In-place radix-2 FFT (size a power of two); inverse includes the 1/n
// normalization.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace fluctuant
