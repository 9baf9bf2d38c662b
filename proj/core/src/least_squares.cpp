#include "cohsrc/least_squares.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <cmath>
#include <limits>

#include "cohsrc/errors.hpp"

namespace cohsrc {

namespace {

struct Functor : Eigen::DenseFunctor<double> {
  Functor(const ResidualFunction& f, int n, int m) : Eigen::DenseFunctor<double>(n, m), fn(f) {}

  int operator()(const InputType& x, ValueType& fvec) const {
    fn(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
       std::span<double>(fvec.data(), static_cast<std::size_t>(fvec.size())));
    return fvec.allFinite() ? 0 : -1;
  }

  int df(const InputType& x, JacobianType& fjac) const {
    InputType xp = x;
    ValueType fp(values());
    ValueType fm(values());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double step = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(x[k]), 1e-8);
      xp[k] = x[k] + step;
      if ((*this)(xp, fp) != 0) return -1;
      xp[k] = x[k] - step;
      if ((*this)(xp, fm) != 0) return -1;
      xp[k] = x[k];
      fjac.col(k) = (fp - fm) / (2.0 * step);
    }
    return 0;
  }

  const ResidualFunction& fn;
};

}  // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, std::size_t m, std::vector<double> p0,
                                       const LeastSquaresOptions& options) {
  const auto n = static_cast<int>(p0.size());
  if (n == 0 || m < p0.size()) throw FitError("fewer residuals than parameters", 0.0);

  Functor functor(f, n, static_cast<int>(m));
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(p0.data(), n);
  Eigen::LevenbergMarquardt<Functor> lm(functor);
  lm.setFtol(options.ftol);
  lm.setXtol(options.xtol);
  lm.setGtol(options.gtol);
  lm.setMaxfev(options.max_evaluations);
  const auto status = lm.minimize(x);

  Eigen::VectorXd r(static_cast<Eigen::Index>(m));
  const bool finite = functor(x, r) == 0 && x.allFinite();
  const double chi2 = finite ? r.squaredNorm() : std::numeric_limits<double>::infinity();
  using Space = Eigen::LevenbergMarquardtSpace::Status;
  if (!finite || status == Space::ImproperInputParameters || status == Space::UserAsked) {
    throw FitError("Levenberg-Marquardt iteration failed", chi2);
  }

  LeastSquaresResult out;
  out.params.assign(x.data(), x.data() + n);
  out.chi2 = chi2;
  out.dof = static_cast<long>(m) - n;
  out.evaluations = static_cast<long>(lm.nfev());
  out.converged = status != Space::TooManyFunctionEvaluation;

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), n);
  if (functor.df(x, jac) != 0) throw FitError("Jacobian is not finite at the solution", chi2);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse();
  if (options.scale_covariance && out.dof > 0) cov *= chi2 / static_cast<double>(out.dof);
  out.covariance.resize(static_cast<std::size_t>(n) * n);
  out.sigma.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.covariance[static_cast<std::size_t>(i) * n + j] = cov(i, j);
    out.sigma[static_cast<std::size_t>(i)] = std::sqrt(std::max(cov(i, i), 0.0));
  }
  return out;
}

LinearFit linear_least_squares(std::span<const double> design, std::span<const double> y,
                               std::span<const double> weights, std::size_t n) {
  const std::size_t m = y.size();
  if (n == 0 || design.size() != m * n || weights.size() != m || m < n) {
    throw FitError("inconsistent linear least-squares dimensions", 0.0);
  }
  Eigen::MatrixXd a(m, n);
  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double sw = std::sqrt(weights[i]);
    for (std::size_t k = 0; k < n; ++k) a(i, k) = sw * design[i * n + k];
    b[i] = sw * y[i];
  }
  const Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
    throw FitError("singular linear least-squares problem", 0.0);
  }
  const Eigen::VectorXd c = ldlt.solve(a.transpose() * b);
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n, n));

  LinearFit out;
  out.coefficients.assign(c.data(), c.data() + n);
  out.covariance.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.covariance[i * n + j] = cov(i, j);
  out.chi2 = (a * c - b).squaredNorm();
  return out;
}

}  // namespace cohsrc
