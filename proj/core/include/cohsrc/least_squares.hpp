#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cohsrc {

/// Fills `residuals` (length m) for parameters `p`.
using ResidualFunction = std::function<void(std::span<const double> p, std::span<double> residuals)>;

struct LeastSquaresOptions {
  double ftol = 1e-14;
  double xtol = 1e-14;
  double gtol = 0.0;
  long max_evaluations = 20000;
  /// Scale the covariance by chi2/dof (unit weights); false keeps the raw (J^T J)^-1.
  bool scale_covariance = true;
};

struct LeastSquaresResult {
  std::vector<double> params;
  std::vector<double> sigma;       // sqrt of the covariance diagonal
  std::vector<double> covariance;  // row-major n x n
  double chi2 = 0.0;               // sum of squared residuals
  long dof = 0;
  long evaluations = 0;
  bool converged = false;

  double reduced_chi2() const noexcept { return dof > 0 ? chi2 / static_cast<double>(dof) : 0.0; }
};

/// Levenberg-Marquardt (MINPACK lmder via Eigen) with a central-difference Jacobian.
/// Throws FitError when the iteration fails or the result is not finite.
LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, std::size_t m,
                                       std::vector<double> p0,
                                       const LeastSquaresOptions& options = {});

/// Linear weighted least squares: minimise sum w_i (y_i - sum_k X_ik c_k)^2.
/// `design` is row-major m x n. Covariance is the unscaled (X^T W X)^-1.
struct LinearFit {
  std::vector<double> coefficients;
  std::vector<double> covariance;  // row-major n x n
  double chi2 = 0.0;
};

LinearFit linear_least_squares(std::span<const double> design, std::span<const double> y,
                               std::span<const double> weights, std::size_t n);

}  // namespace cohsrc
