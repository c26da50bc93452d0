#pragma once

#include <vector>

namespace fluctuant {

struct MeanCI {
  double value = 0.0;  // point estimate
  double lo = 0.0;     // 95% interval
  double hi = 0.0;
  double se = 0.0;
  int n = 0;
};

// Delete-1 jackknife confidence intervals over independent trajectories.
MeanCI jackknife_mean(const std::vector<double>& xs);
MeanCI jackknife_mean_sq(const std::vector<double>& xs);  // E[X^2]
MeanCI jackknife_variance(const std::vector<double>& xs);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se_slope = 0.0;
};

// OLS of log(y) on log(x). Requires >= 4 points, all positive (NonPositive).
SlopeFit scaling_exponent(const std::vector<double>& x,
                          const std::vector<double>& y);

struct HurstFit {
  double h = 0.0;
  double se = 0.0;
};

// Hurst index from variances on a time grid: Var(t) ~ t^{2H}, so H is half
// the log-log slope. Requires >= 5 grid points.
HurstFit hurst_exponent(const std::vector<double>& t,
                        const std::vector<double>& var);

// Anderson-Darling test of normality with estimated mean and variance
// (case 3): returns the p-value from the finite-sample adjusted statistic.
double anderson_darling_pvalue(std::vector<double> xs);

struct BoundRatio {
  std::vector<double> ratios;  // lhs_i / bound_i per grid point
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  bool pass = false;  // ratios stable within a factor 10 across the grid
};

// Existential-constant check: lhs(g) <= c * bound(g) with one c for the whole
// grid. PASS iff every ratio is finite and max/min <= 10.
BoundRatio bound_ratio_check(const std::vector<double>& lhs,
                             const std::vector<double>& bound);

}  // namespace fluctuant
