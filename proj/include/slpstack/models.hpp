#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "slpstack/analytic.hpp"
#include "slpstack/distribution.hpp"
#include "slpstack/error.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/program.hpp"
#include "slpstack/random.hpp"

namespace slpstack {

/// Regression-style data: N rows of covariates (possibly zero columns) and targets.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }

  Dataset rows(Eigen::Index first, Eigen::Index count) const {
    return {x.middleRows(first, count), y.segment(first, count)};
  }

  static Dataset concat(const Dataset& a, const Dataset& b) {
    Dataset out;
    out.x.resize(a.x.rows() + b.x.rows(), std::max(a.x.cols(), b.x.cols()));
    if (out.x.size() > 0) out.x << a.x, b.x;
    out.y.resize(a.y.size() + b.y.size());
    out.y << a.y, b.y;
    return out;
  }
};

// Two SLPs that fit N(0, 1) data equally badly in KL: a too-narrow and a
// too-wide Gaussian likelihood around a shared mean.
inline constexpr std::array<double, 2> kDistinctNoiseSd{0.62177, 2.0};

inline Dataset gen_distinct(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) = normal(rng);
  return d;
}

inline Program distinct_program(const Dataset& train, const Dataset& eval) {
  auto y = std::make_shared<const Eigen::VectorXd>(train.y);
  auto y_eval = std::make_shared<const Eigen::VectorXd>(eval.y);
  return Program("distinct_slps", [y, y_eval](Handler& h) {
    const std::int64_t k = h.branch("k", Distribution::discrete_uniform(1, 2));
    const double theta = h.sample("theta", Distribution::normal(0.0, 1.0));
    const double sd = kDistinctNoiseSd[static_cast<std::size_t>(k - 1)];
    const Distribution lik = Distribution::normal(theta, sd);
    for (double yi : *y) h.observe("y", lik, yi);
    std::vector<double> ret;
    if (h.wants_return()) {
      ret.reserve(static_cast<std::size_t>(y_eval->size()));
      for (double yi : *y_eval) ret.push_back(log_normal_pdf(yi, theta, sd));
    }
    return ret;
  });
}

inline std::vector<double> distinct_log_Z(const Dataset& train) {
  std::vector<double> out;
  const std::span<const double> y(train.y.data(), train.size());
  for (double sd : kDistinctNoiseSd) out.push_back(analytic_log_Z_normal(0.0, 1.0, sd * sd, std::log(0.5), y));
  return out;
}

inline const Eigen::Vector4d& default_overlap_beta() {
  static const Eigen::Vector4d beta(1.5, 1.5, 0.3, 0.1);
  return beta;
}

inline Dataset gen_overlap(std::size_t n, std::uint64_t seed, const Eigen::Vector4d& beta = default_overlap_beta()) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 4), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) d.x(i, j) = normal(rng);
    d.y(i) = d.x.row(i).dot(beta) + normal(rng);
  }
  return d;
}

// Covariate columns used by each overlap SLP: both share the first one.
inline constexpr std::array<std::array<Eigen::Index, 2>, 2> kOverlapColumns{{{0, 2}, {0, 3}}};

inline Program overlap_program(const Dataset& train, const Dataset& eval) {
  auto tr = std::make_shared<const Dataset>(train);
  auto ev = std::make_shared<const Dataset>(eval);
  return Program("overlap_slps", [tr, ev](Handler& h) {
    const std::int64_t k = h.branch("k", Distribution::discrete_uniform(1, 2));
    const auto& cols = kOverlapColumns[static_cast<std::size_t>(k - 1)];
    const double t1 = h.sample("theta1", Distribution::normal(0.0, 1.0));
    const double t2 = h.sample("theta2", Distribution::normal(0.0, 1.0));
    for (Eigen::Index i = 0; i < tr->y.size(); ++i)
      h.observe("y", Distribution::normal(t1 * tr->x(i, cols[0]) + t2 * tr->x(i, cols[1]), 1.0), tr->y(i));
    std::vector<double> ret;
    if (h.wants_return())
      for (Eigen::Index i = 0; i < ev->y.size(); ++i)
        ret.push_back(log_normal_pdf(ev->y(i), t1 * ev->x(i, cols[0]) + t2 * ev->x(i, cols[1]), 1.0));
    return ret;
  });
}

inline std::vector<double> overlap_log_Z(const Dataset& train) {
  std::vector<double> out;
  for (const auto& cols : kOverlapColumns) {
    Eigen::MatrixXd x(train.x.rows(), 2);
    x << train.x.col(cols[0]), train.x.col(cols[1]);
    out.push_back(analytic_log_Z_linear(x, train.y, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 1.0,
                                        std::log(0.5)));
  }
  return out;
}

inline Dataset gen_dominant(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double x = normal(rng);
    d.x(i, 0) = x;
    d.y(i) = 2.0 * x + std::sin(5.0 * x) + normal(rng);
  }
  return d;
}

inline Program dominant_program(const Dataset& train, const Dataset& eval) {
  auto tr = std::make_shared<const Dataset>(train);
  auto ev = std::make_shared<const Dataset>(eval);
  return Program("dominant_slp", [tr, ev](Handler& h) {
    const std::int64_t k = h.branch("k", Distribution::discrete_uniform(1, 2));
    const double t1 = h.sample("theta1", Distribution::normal(0.0, 1.0));
    const double sd = h.sample("theta2", Distribution::gamma(1.0, 1.0));
    auto mean = [&](double x) { return k == 1 ? t1 * x : std::sin(t1 * x); };
    if (!(sd > 0.0)) {
      h.factor("invalid_scale", kNegInf);
      return std::vector<double>(h.wants_return() ? static_cast<std::size_t>(ev->y.size()) : 0, kNegInf);
    }
    for (Eigen::Index i = 0; i < tr->y.size(); ++i) h.observe("y", Distribution::normal(mean(tr->x(i, 0)), sd), tr->y(i));
    std::vector<double> ret;
    if (h.wants_return())
      for (Eigen::Index i = 0; i < ev->y.size(); ++i) ret.push_back(log_normal_pdf(ev->y(i), mean(ev->x(i, 0)), sd));
    return ret;
  });
}

inline constexpr std::size_t kSubsetDim = 15;

/// Kernel bump (h - |d - a|)^2 on |d - a| < h.
inline double subset_zeta(int d, int a, int h) {
  const int dist = std::abs(d - a);
  return dist < h ? static_cast<double>((h - dist) * (h - dist)) : 0.0;
}

/// Coefficients eta * sum over centers {4, 8, 12} of zeta, with eta chosen
/// so the signal variance under unit-variance covariates is
/// sum beta^2 = snr / (1 - snr) = 4.
inline Eigen::VectorXd subset_beta(int dim = static_cast<int>(kSubsetDim), int h = 5, double snr = 0.8) {
  Eigen::VectorXd beta(dim);
  for (int d = 1; d <= dim; ++d) beta(d - 1) = subset_zeta(d, 4, h) + subset_zeta(d, 8, h) + subset_zeta(d, 12, h);
  const double target = snr / (1.0 - snr);
  return beta * std::sqrt(target / beta.squaredNorm());
}

inline Dataset gen_subset(std::size_t n, std::uint64_t seed, int dim = static_cast<int>(kSubsetDim), int h = 5) {
  Rng rng(seed);
  std::normal_distribution<double> cov(5.0, 1.0), noise(0.0, 1.0);
  const Eigen::VectorXd beta = subset_beta(dim, h);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), dim), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) d.x(i, j) = cov(rng);
    d.y(i) = d.x.row(i).dot(beta) + noise(rng);
  }
  return d;
}

inline constexpr double kSubsetPriorVar = 10.0;
inline constexpr double kSubsetNoiseShape = 0.1;
inline constexpr double kSubsetNoiseRate = 0.1;

inline Program subset_program(const Dataset& train, const Dataset& eval) {
  auto tr = std::make_shared<const Dataset>(train);
  auto ev = std::make_shared<const Dataset>(eval);
  return Program("subset_regression", [tr, ev](Handler& h) {
    const auto dim = static_cast<std::int64_t>(tr->x.cols());
    const std::int64_t k = h.branch("k", Distribution::discrete_uniform(1, dim));
    const Eigen::Index col = static_cast<Eigen::Index>(k - 1);
    const double b = h.sample("beta_" + std::to_string(k), Distribution::normal(0.0, std::sqrt(kSubsetPriorVar)));
    const double sd = h.sample("sigma", Distribution::gamma(kSubsetNoiseShape, kSubsetNoiseRate));
    if (!(sd > 0.0)) {
      h.factor("invalid_scale", kNegInf);
      return std::vector<double>(h.wants_return() ? static_cast<std::size_t>(ev->y.size()) : 0, kNegInf);
    }
    for (Eigen::Index i = 0; i < tr->y.size(); ++i) h.observe("y", Distribution::normal(b * tr->x(i, col), sd), tr->y(i));
    std::vector<double> ret;
    if (h.wants_return())
      for (Eigen::Index i = 0; i < ev->y.size(); ++i) ret.push_back(log_normal_pdf(ev->y(i), b * ev->x(i, col), sd));
    return ret;
  });
}

inline std::vector<double> subset_log_Z(const Dataset& train) {
  std::vector<double> out;
  const auto dim = train.x.cols();
  const std::span<const double> y(train.y.data(), train.size());
  for (Eigen::Index k = 0; k < dim; ++k) {
    const Eigen::VectorXd xk = train.x.col(k);
    out.push_back(log_Z_slope_gamma_noise(std::span<const double>(xk.data(), train.size()), y, kSubsetPriorVar,
                                          kSubsetNoiseShape, kSubsetNoiseRate, -std::log(static_cast<double>(dim))));
  }
  return out;
}

inline constexpr std::array<double, 3> kPcfgProductionProbs{0.4, 0.4, 0.2};

/// Data for the grammar fixture: y = -x + 2 sin(2 x^2) + N(0, 0.1^2), x ~ U(-5, 5).
inline Dataset gen_pcfg(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  Dataset d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double x = unif(rng);
    d.x(i, 0) = x;
    d.y(i) = -x + 2.0 * std::sin(2.0 * x * x) + noise(rng);
  }
  return d;
}

namespace detail {

/// Expression tree over the input x, built by recursive production choices.
struct Expr {
  int production = 0;
  double a = 0.0, b = 0.0;
  std::unique_ptr<Expr> left, right;

  double eval(double x) const {
    switch (production) {
      case 0: return x;
      case 1: return std::sin(a * left->eval(x));
      default: return a * left->eval(x) + b * right->eval(x);
    }
  }
};

inline std::unique_ptr<Expr> sample_expr(Handler& h) {
  auto e = std::make_unique<Expr>();
  e->production = static_cast<int>(
      h.branch("e", Distribution::categorical({kPcfgProductionProbs.begin(), kPcfgProductionProbs.end()})));
  const double coef_sd = std::sqrt(10.0);
  if (e->production == 1) {
    e->a = h.sample("a", Distribution::normal(0.0, coef_sd));
    e->left = sample_expr(h);
  } else if (e->production == 2) {
    e->a = h.sample("a", Distribution::normal(0.0, coef_sd));
    e->left = sample_expr(h);
    e->b = h.sample("b", Distribution::normal(0.0, coef_sd));
    e->right = sample_expr(h);
  }
  return e;
}

}  // namespace detail

/// Grammar e -> x | sin(a e) | a e + b e with production probabilities
/// (0.4, 0.4, 0.2); every production choice is a branching site, so each
/// derivation is one SLP.
inline Program pcfg_program(const Dataset& train = gen_pcfg(20, 0), const Dataset& eval = {}) {
  auto tr = std::make_shared<const Dataset>(train);
  auto ev = std::make_shared<const Dataset>(eval);
  return Program("pcfg", [tr, ev](Handler& h) {
    const auto expr = detail::sample_expr(h);
    for (Eigen::Index i = 0; i < tr->y.size(); ++i) h.observe("y", Distribution::normal(expr->eval(tr->x(i, 0)), 0.1), tr->y(i));
    std::vector<double> ret;
    if (h.wants_return())
      for (Eigen::Index i = 0; i < ev->y.size(); ++i) ret.push_back(log_normal_pdf(ev->y(i), expr->eval(ev->x(i, 0)), 0.1));
    return ret;
  });
}

/// A replicable experiment model: data generator, program factory over
/// (training data, evaluation points) and, when available, exact per-SLP log
/// evidence in enumeration order.
struct ModelSpec {
  std::string name;
  std::function<Dataset(std::size_t, std::uint64_t)> generate;
  std::function<Program(const Dataset&, const Dataset&)> program;
  std::function<std::vector<double>(const Dataset&)> analytic_log_Z;  // empty when unavailable
};

inline const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"distinct", "overlap", "dominant", "subset", "pcfg-enum"};
  return names;
}

inline ModelSpec builtin_model(std::string_view name) {
  if (name == "distinct") return {"distinct", gen_distinct, distinct_program, distinct_log_Z};
  if (name == "overlap")
    return {"overlap", [](std::size_t n, std::uint64_t s) { return gen_overlap(n, s); }, overlap_program,
            overlap_log_Z};
  if (name == "dominant") return {"dominant", gen_dominant, dominant_program, {}};
  if (name == "subset")
    return {"subset", [](std::size_t n, std::uint64_t s) { return gen_subset(n, s); }, subset_program, subset_log_Z};
  if (name == "pcfg-enum" || name == "pcfg") return {"pcfg-enum", gen_pcfg, pcfg_program, {}};
  fail(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

}  // namespace slpstack
