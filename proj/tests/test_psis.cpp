#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slpstack/psis.hpp"

using namespace slpstack;

namespace {

std::vector<double> gpd_draws(std::size_t n, double k, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) {
    const double p = u(rng);
    x = k == 0.0 ? -sigma * std::log1p(-p) : sigma * (std::pow(1.0 - p, -k) - 1.0) / k;
  }
  return out;
}

/// S x N log-likelihood matrix of iid posterior draws for the conjugate model.
Eigen::MatrixXd conjugate_log_lik(const std::vector<double>& y, double s2, std::size_t s, std::uint64_t seed) {
  const auto [m, v] = oracle::posterior_normal(y, 0.0, 1.0, s2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> post(m, std::sqrt(v));
  Eigen::MatrixXd ll(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(y.size()));
  for (Eigen::Index j = 0; j < ll.rows(); ++j) {
    const double th = post(rng);
    for (Eigen::Index i = 0; i < ll.cols(); ++i) {
      const double z = y[static_cast<std::size_t>(i)] - th;
      ll(j, i) = -0.5 * std::log(2 * M_PI * s2) - z * z / (2 * s2);
    }
  }
  return ll;
}

}  // namespace

TEST(Gpd, RecoversHeavyTailShape) {
  const auto fit = fit_gpd(gpd_draws(10000, 0.2, 1.0, 1));
  EXPECT_GT(fit.k, 0.15);
  EXPECT_LT(fit.k, 0.25);
  EXPECT_NEAR(fit.sigma, 1.0, 0.1);
}

TEST(Gpd, ExponentialHasZeroShape) {
  const auto fit = fit_gpd(gpd_draws(10000, 0.0, 2.0, 2));
  EXPECT_GT(fit.k, -0.05);
  EXPECT_LT(fit.k, 0.05);
}

TEST(Gpd, DegenerateInputs) {
  EXPECT_THROW(fit_gpd(std::vector<double>(10, 1.5)), Error);
  EXPECT_THROW(fit_gpd({1.0, 2.0}), Error);
  EXPECT_THROW(fit_gpd({1.0, 2.0, -1.0, 3.0, 4.0}), Error);
}

TEST(Psis, TailLength) {
  EXPECT_EQ(psis_tail_length(4000), static_cast<std::size_t>(std::ceil(3.0 * std::sqrt(4000.0))));
  EXPECT_EQ(psis_tail_length(100), 20u);
  EXPECT_EQ(psis_tail_length(10), 2u);
}

TEST(Psis, ConstantRatiosUnchanged) {
  const std::vector<double> lr(100, -2.5);
  const auto sw = psis_smooth(lr);
  EXPECT_EQ(sw.log_weights, lr);
  EXPECT_EQ(sw.khat, kInf);
}

TEST(Psis, HeavyTailCappedAndFlagged) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> lr(4000);
  for (double& v : lr) v = n(rng);
  const auto sw = psis_smooth(lr);
  const double raw_max = *std::max_element(lr.begin(), lr.end());
  EXPECT_LE(*std::max_element(sw.log_weights.begin(), sw.log_weights.end()), raw_max);
  EXPECT_GT(sw.khat, kBadKhat);
}

TEST(Psis, PreservesOrderAndBody) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> lr(1000);
  for (double& v : lr) v = n(rng);
  std::sort(lr.begin(), lr.end());
  const auto sw = psis_smooth(lr);
  const std::size_t m = psis_tail_length(lr.size());
  for (std::size_t i = 0; i + m < lr.size(); ++i) EXPECT_EQ(sw.log_weights[i], lr[i]);
  for (std::size_t i = lr.size() - m; i + 1 < lr.size(); ++i) EXPECT_LE(sw.log_weights[i], sw.log_weights[i + 1]);
  EXPECT_TRUE(std::isfinite(sw.khat));
}

TEST(Loo, MatchesExactConjugateLoo) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.5, 1.0);
  std::vector<double> y(20);
  for (double& v : y) v = n(rng);
  const auto exact = oracle::exact_loo_normal(y, 0.0, 1.0, 1.0);
  const LooMatrix loo = psis_loo_matrix(std::vector<Eigen::MatrixXd>{conjugate_log_lik(y, 1.0, 4000, 6)});
  double err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) err += std::abs(loo.log_rho_loo(0, static_cast<Eigen::Index>(i)) - exact[i]);
  EXPECT_LT(err / 20.0, 0.05);
  EXPECT_EQ(loo.n_bad_khat, 0u);
}

TEST(Loo, ConstantLikelihoodIsExact) {
  const Eigen::MatrixXd ll = Eigen::MatrixXd::Constant(200, 3, -1.25);
  const LooMatrix loo = psis_loo_matrix(std::vector<Eigen::MatrixXd>{ll});
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(loo.log_rho_loo(0, i), -1.25, 1e-14);
}

TEST(Loo, TinySlpFallsBackToRawRatios) {
  Eigen::MatrixXd small(3, 2);
  small << -1.0, -2.0, -1.5, -0.5, -0.7, -1.1;
  const LooMatrix loo = psis_loo_matrix(std::vector<Eigen::MatrixXd>{small, Eigen::MatrixXd::Constant(50, 2, -1.0)});
  for (Eigen::Index i = 0; i < 2; ++i) {
    // Raw self-normalized IS: 1 / mean_s(1 / g_s).
    double inv = 0.0;
    for (Eigen::Index s = 0; s < 3; ++s) inv += std::exp(-small(s, i));
    EXPECT_NEAR(loo.log_rho_loo(0, i), -std::log(inv / 3.0), 1e-13);
    EXPECT_EQ(loo.khat(0, i), kInf);
  }
  EXPECT_FALSE(loo.diagnostics.empty());
}

TEST(Loo, WeightedRowMatchesDuplication) {
  // A sample with weight 2/3 behaves like two copies of it.
  Eigen::MatrixXd ll(2, 1), dup(3, 1);
  ll << -1.0, -3.0;
  dup << -1.0, -1.0, -3.0;
  const std::vector<double> log_v{std::log(2.0 / 3.0), std::log(1.0 / 3.0)};
  const LooRow a = loo_row(ll, log_v);
  const LooRow b = loo_row(dup, std::vector<double>(3, 0.0));
  EXPECT_NEAR(a.log_rho_loo(0), b.log_rho_loo(0), 1e-14);
}

TEST(Loo, SingleSlpWeightIsOne) {
  const LooMatrix loo = psis_loo_matrix(std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Constant(10, 4, -2.0)});
  EXPECT_DOUBLE_EQ(loo_stacking_weights(loo).w[0], 1.0);
}

TEST(Loo, SameWeightsAsValidationStacking) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd a = oracle::random_matrix(3, 15, rng);
  LooMatrix loo;
  loo.log_rho_loo = a;
  loo.khat = Eigen::MatrixXd::Zero(3, 15);
  const PredictiveMatrix m{a, {}};
  EXPECT_EQ(loo_stacking_weights(loo).w.values(), optimize_stacking(m).w.values());
}

TEST(Loo, MissingTermsRejected) {
  Trace t1, t2;
  t1.push_observation(Address{"y", 0}, -1.0);
  try {
    log_lik_matrix({t1, t2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLikelihoodTerms);
  }
}
