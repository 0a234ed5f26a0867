#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slpstack/weighting.hpp"

using namespace slpstack;

namespace {

PredictiveMatrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
  PredictiveMatrix m;
  m.log_rho.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m.log_rho(r, c++) = v;
    ++r;
  }
  return m;
}

Trace with_return(std::vector<double> ret) {
  Trace t;
  t.return_value = std::move(ret);
  return t;
}

std::vector<double> vec(const WeightVector& w) { return w.values(); }

}  // namespace

TEST(PredictiveMatrix, SingleSamplePerSlp) {
  WeightedSamples s;
  s.traces = {with_return({-1.0, -2.0}), with_return({-3.0, -4.0})};
  s.traces[0].records.push_back({Address{"k", 0}, std::int64_t{0}, 0.0, true});
  s.traces[1].records.push_back({Address{"k", 0}, std::int64_t{1}, 0.0, true});
  s.weights = {0.5, 0.5};
  const auto m = predictive_matrix(s, partition(s));
  EXPECT_DOUBLE_EQ(m.log_rho(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(m.log_rho(1, 1), -4.0);
}

TEST(PredictiveMatrix, TwoSamplesAverageOnNaturalScale) {
  const double a = 0.2, b = 0.6;
  const WeightedSamples s = WeightedSamples::uniform({with_return({std::log(a)}), with_return({std::log(b)})});
  EXPECT_NEAR(predictive_row(s, 1)(0), std::log((a + b) / 2.0), 1e-15);
}

TEST(PredictiveMatrix, InconsistentLengthsRejected) {
  const WeightedSamples s = WeightedSamples::uniform({with_return({0.0}), with_return({0.0, 1.0})});
  try {
    predictive_matrix(s, partition(s));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentReturnLength);
  }
}

TEST(Stacking, SingleSlpObjectiveIsRowMean) {
  const auto m = matrix({{-1.0, -2.0, -4.5}});
  EXPECT_NEAR(stacking_objective(WeightVector({1.0}), m), -7.5 / 3.0, 1e-15);
}

TEST(Stacking, IdenticalRowsAreFlat) {
  const auto m = matrix({{-1.0, -0.3}, {-1.0, -0.3}});
  EXPECT_NEAR(stacking_objective(WeightVector({0.2, 0.8}), m), stacking_objective(WeightVector({0.9, 0.1}), m), 1e-15);
  const auto opt = optimize_stacking(m);
  EXPECT_NEAR(opt.objective, -0.65, 1e-12);
}

TEST(Stacking, HandEvaluatedObjective) {
  const auto m = matrix({{0.0, -6.0}, {-6.0, 0.0}});
  EXPECT_NEAR(stacking_objective(WeightVector({0.5, 0.5}), m), std::log(0.5 + 0.5 * std::exp(-6.0)), 1e-15);
}

TEST(Stacking, DominantRowGivesVertex) {
  const auto m = matrix({{-1.0, -2.0, -0.5}, {-1.5, -2.5, -0.7}});
  const auto w = optimize_stacking(m).w;
  EXPECT_NEAR(w[0], 1.0, 1e-4);
}

TEST(Stacking, SymmetricMatrixMatchesGrid) {
  const auto m = matrix({{0.0, -6.0}, {-6.0, 0.0}});
  const auto w = optimize_stacking(m).w;
  const auto grid = oracle::grid_max(2, 1e-4, [&](const std::vector<double>& v) { return oracle::stacking(m.log_rho, v); });
  EXPECT_NEAR(w[0], 0.5, 1e-3);
  EXPECT_NEAR(w[0], grid.w[0], 1e-3);
}

TEST(Stacking, UnrepresentedSlpGetsZero) {
  auto m = matrix({{-1.0, -2.0}, {kNegInf, kNegInf}, {-2.0, -1.0}});
  const auto opt = optimize_stacking(m);
  EXPECT_EQ(opt.w[1], 0.0);
  EXPECT_NEAR(opt.w[0], 0.5, 1e-6);
}

TEST(Bma, Weights) {
  EXPECT_EQ(vec(bma_weights(std::vector<double>{-3.0, -3.0, -3.0})), std::vector<double>(3, 1.0 / 3.0));
  const auto w = bma_weights(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(w[0], 0.25, 1e-15);
  EXPECT_NEAR(w[1], 0.75, 1e-15);
  const auto z = bma_weights(std::vector<double>{-1e4, 0.0});
  EXPECT_GE(z[0], 0.0);
  EXPECT_THROW(bma_weights(std::vector<double>{kNegInf, kNegInf}), Error);
  EXPECT_THROW(bma_weights(std::vector<double>{std::nan(""), 0.0}), Error);
}

TEST(Equal, Weights) {
  EXPECT_EQ(vec(equal_weights(4)), std::vector<double>(4, 0.25));
  EXPECT_EQ(vec(equal_weights(1)), std::vector<double>{1.0});
  EXPECT_EQ(vec(equal_weights(3, {true, false, true})), (std::vector<double>{0.5, 0.0, 0.5}));
}

TEST(Pac, ObjectiveLimits) {
  const auto m = matrix({{-1.0, -2.0, -0.5, -1.2, -0.1, -3.0, -1.0, -0.4, -0.9, -2.2},
                         {-1.3, -0.2, -1.5, -0.9, -0.8, -0.6, -2.0, -1.1, -0.7, -0.3}});
  const WeightVector w({0.3, 0.7});
  EXPECT_EQ(pac_objective(w, m, PacConfig{kInf, std::nullopt}), stacking_objective(w, m));
  EXPECT_NEAR(pac_objective(w, m, PacConfig{1.0, w}), stacking_objective(w, m), 1e-15);
  const WeightVector vertex({1.0, 0.0});
  EXPECT_NEAR(pac_objective(vertex, m, PacConfig{1.0, std::nullopt}),
              stacking_objective(vertex, m) - std::log(2.0) / 10.0, 1e-14);
}

TEST(Pac, SmallBetaFollowsReference) {
  const auto m = matrix({{-0.1, -0.2, -0.1}, {-5.0, -4.0, -6.0}, {-3.0, -2.0, -1.0}});
  const WeightVector r({0.2, 0.5, 0.3});
  const auto w = optimize_pac(m, PacConfig{1e-8, r}).w;
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(w[k], r[k], 1e-3);
}

TEST(Pac, InfiniteBetaMatchesStacking) {
  const auto m = matrix({{-0.1, -2.2, -1.1}, {-1.0, -0.4, -0.6}});
  const double stack = optimize_stacking(m).objective;
  const double pac = stacking_objective(optimize_pac(m, PacConfig{}).w, m);
  EXPECT_NEAR(pac, stack, 1e-5);
}

TEST(Pac, AsymmetricMatchesGrid) {
  const auto m = matrix({{-0.3, -2.0, -1.0, -0.2}, {-1.5, -0.5, -0.8, -2.5}});
  const auto w = optimize_pac(m, PacConfig{1.0, std::nullopt}).w;
  const auto grid = oracle::grid_max(2, 1e-4, [&](const std::vector<double>& v) { return oracle::pac(m.log_rho, v, 1.0); });
  EXPECT_NEAR(w[0], grid.w[0], 1e-3);
}

TEST(Pac, InvalidBeta) {
  const auto m = matrix({{-1.0}});
  EXPECT_THROW(optimize_pac(m, PacConfig{0.0, std::nullopt}), Error);
  EXPECT_THROW(optimize_pac(m, PacConfig{1.0, WeightVector({0.5, 0.5})}), Error);
}

TEST(Lppd, HandValues) {
  const auto m = matrix({{-1.0, -3.0}, {-2.0, -5.0}});
  EXPECT_NEAR(lppd(m, WeightVector({0.0, 1.0})), -3.5, 1e-15);
  const auto single = matrix({{std::log(0.2)}, {std::log(0.8)}});
  EXPECT_NEAR(lppd(single, WeightVector({0.5, 0.5})), std::log(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(lppd_diff(-1.0, -1.0), 0.0);
}

TEST(Simplex, WeightVectorValidation) {
  EXPECT_THROW(WeightVector({0.5, 0.6}), Error);
  EXPECT_THROW(WeightVector({-0.1, 1.1}), Error);
  EXPECT_THROW(WeightVector::normalized({0.0, 0.0}), Error);
  EXPECT_NEAR(kl_divergence(WeightVector({1.0, 0.0}), WeightVector({0.5, 0.5})), std::log(2.0), 1e-15);
  EXPECT_EQ(kl_divergence(WeightVector({0.5, 0.5}), WeightVector({1.0, 0.0})), kInf);
}

TEST(Simplex, InfeasibleMatrix) {
  auto m = matrix({{kNegInf, kNegInf}, {kNegInf, kNegInf}});
  try {
    optimize_stacking(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(Simplex, DeadColumnsAreReported) {
  auto m = matrix({{-1.0, kNegInf}, {-2.0, kNegInf}});
  const auto opt = optimize_stacking(m);
  EXPECT_NEAR(opt.w[0], 1.0, 1e-6);
  EXPECT_FALSE(opt.diagnostics.empty());
}
