#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"

namespace slpstack {

/// Exact log evidence of branch_prior x N(theta; m, v) x prod_i N(y_i; theta, s2).
inline double analytic_log_Z_normal(double prior_mean, double prior_var, double lik_var, double branch_log_prior,
                                    std::span<const double> data) {
  if (!(prior_var > 0) || !(lik_var > 0))
    fail(ErrorCode::NonPositiveVariance, "prior_var and lik_var must be > 0");
  const double n = static_cast<double>(data.size());
  if (data.empty()) return branch_log_prior;
  double ybar = 0.0;
  for (double y : data) ybar += y;
  ybar /= n;
  double ss = 0.0;
  for (double y : data) ss += (y - ybar) * (y - ybar);
  const double denom = lik_var + n * prior_var;
  const double d = ybar - prior_mean;
  return branch_log_prior - n * kLogSqrt2Pi - 0.5 * n * std::log(lik_var) - ss / (2.0 * lik_var) +
         0.5 * std::log(lik_var / denom) - n * d * d / (2.0 * denom);
}

/// Exact log evidence of a Gaussian linear model with known noise variance:
/// y = X theta + eps, theta ~ N(m, V), eps ~ N(0, s2 I). Uses the Woodbury
/// identity so cost is O(N d^2).
inline double analytic_log_Z_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_cov,
                                    double noise_var, double branch_log_prior) {
  if (!(noise_var > 0)) fail(ErrorCode::NonPositiveVariance, "noise variance must be > 0");
  const auto n = static_cast<double>(y.size());
  const Eigen::LLT<Eigen::MatrixXd> prior_llt(prior_cov);
  if (prior_llt.info() != Eigen::Success) fail(ErrorCode::NonPositiveVariance, "prior covariance not PD");
  const Eigen::VectorXd r = y - x * prior_mean;
  const Eigen::MatrixXd prior_prec = prior_llt.solve(Eigen::MatrixXd::Identity(prior_cov.rows(), prior_cov.cols()));
  const Eigen::MatrixXd a = prior_prec + x.transpose() * x / noise_var;
  const Eigen::LLT<Eigen::MatrixXd> a_llt(a);
  const Eigen::VectorXd b = x.transpose() * r / noise_var;
  const double quad = r.squaredNorm() / noise_var - b.dot(a_llt.solve(b));
  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const double logdet = n * std::log(noise_var) + log_det(prior_llt) + log_det(a_llt);
  return branch_log_prior - n * kLogSqrt2Pi - 0.5 * logdet - 0.5 * quad;
}

/// Log evidence of y_i ~ N(theta * x_i, sigma^2), theta ~ N(0, prior_var),
/// sigma ~ Gamma(shape, rate). theta is integrated in closed form; sigma by
/// adaptive Gauss-Kronrod quadrature in log(sigma) around the integrand's
/// peak. Relative accuracy is far below Monte Carlo error at any practical
/// sample size.
inline double log_Z_slope_gamma_noise(std::span<const double> x, std::span<const double> y, double prior_var,
                                      double shape, double rate, double branch_log_prior) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "x/y length mismatch");
  if (!(prior_var > 0)) fail(ErrorCode::NonPositiveVariance, "prior_var must be > 0");
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double n = static_cast<double>(x.size());
  const double log_gamma_norm = shape * std::log(rate) - std::lgamma(shape);
  // log integrand in u = log sigma, including the Jacobian sigma.
  auto log_f = [&](double u) {
    const double sigma = std::exp(u);
    const double s = sigma * sigma;
    const double t = s + prior_var * sxx;
    const double log_lik = -n * kLogSqrt2Pi - 0.5 * ((n - 1.0) * std::log(s) + std::log(t)) -
                           0.5 * (syy / s - prior_var * sxy * sxy / (s * t));
    const double log_prior = log_gamma_norm + (shape - 1.0) * u - rate * sigma;
    return log_lik + log_prior + u;
  };
  constexpr double lo = -30.0, hi = 12.0, step = 0.01;
  double peak = kNegInf;
  std::vector<double> grid;
  for (double u = lo; u <= hi; u += step) {
    grid.push_back(log_f(u));
    peak = std::max(peak, grid.back());
  }
  if (!std::isfinite(peak)) fail(ErrorCode::InvalidArgument, "evidence integrand vanished everywhere");
  std::size_t first = grid.size(), last = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] > peak - 60.0) {
      first = std::min(first, i);
      last = i;
    }
  }
  const double a = lo + step * (static_cast<double>(first) - 1.0);
  const double b = lo + step * (static_cast<double>(last) + 1.0);
  auto integrand = [&](double u) { return std::exp(log_f(u) - peak); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, b, 20, 1e-14);
  return branch_log_prior + peak + std::log(integral);
}

}  // namespace slpstack
