#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace slpstack {

struct BfgsOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-10;
  /// Stop after this many consecutive iterations improving f by less than
  /// `stall_tolerance` (relative).
  int stall_iterations = 20;
  double stall_tolerance = 1e-15;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// f(x, grad) returns the objective and writes its gradient.
using SmoothObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Unconstrained minimization by BFGS with an Armijo backtracking line search.
/// The inverse-Hessian update is skipped whenever the curvature condition
/// s'y > 0 fails, so the approximation stays positive definite.
inline BfgsResult minimize_bfgs(const SmoothObjective& f, Eigen::VectorXd x0, const BfgsOptions& opt = {}) {
  const auto n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  Eigen::VectorXd g(n), g_new(n);
  r.value = f(r.x, g);
  if (!std::isfinite(r.value) || n == 0) return r;
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  int stalled = 0;
  for (; r.iterations < opt.max_iterations; ++r.iterations) {
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) break;
    Eigen::VectorXd dir = -h * g;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      h.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      x_new = r.x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * step * slope) {
        found = true;
        break;
      }
    }
    if (!found) break;
    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(n, n);
      h = (i - rho * s * y.transpose()) * h * (i - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double improvement = r.value - f_new;
    stalled = improvement <= opt.stall_tolerance * (1.0 + std::abs(r.value)) ? stalled + 1 : 0;
    r.x = std::move(x_new);
    r.value = f_new;
    g = g_new;
    if (stalled >= opt.stall_iterations) break;
  }
  return r;
}

}  // namespace slpstack
