#include <cmath>

#include <gtest/gtest.h>

#include "slpstack/enumerate.hpp"
#include "slpstack/inference.hpp"
#include "slpstack/models.hpp"

using namespace slpstack;

TEST(Distinct, Constants) {
  EXPECT_EQ(kDistinctNoiseSd[0], 0.62177);
  EXPECT_EQ(kDistinctNoiseSd[1], 2.0);
}

TEST(Distinct, GeneratorMean) {
  for (std::size_t n : {100u, 10000u}) {
    const Dataset d = gen_distinct(n, 12);
    EXPECT_LT(std::abs(d.y.mean()), 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Distinct, BranchPriorIsHalf) {
  const Dataset d = gen_distinct(3, 1);
  const Trace t = run_forward(distinct_program(d, d), 2);
  EXPECT_NEAR(t.records[0].log_prior_term, std::log(0.5), 1e-15);
}

TEST(Overlap, DefaultBetaAndOverride) {
  EXPECT_EQ(default_overlap_beta(), Eigen::Vector4d(1.5, 1.5, 0.3, 0.1));
  for (const auto& cols : kOverlapColumns) EXPECT_EQ(cols[0], 0);
  const Eigen::Vector4d beta(1.5, 1.5, 0.0, 0.0);
  const Dataset d = gen_overlap(20000, 3, beta);
  const Eigen::Vector4d ls = d.x.colPivHouseholderQr().solve(d.y);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(ls(j), beta(j), 0.03);
}

TEST(Overlap, AnalyticEvidenceMatchesIs) {
  const Dataset d = gen_overlap(15, 4);
  const Program p = overlap_program(d, d);
  const auto exact = overlap_log_Z(d);
  const auto en = enumerate_slps(p, 4);
  ASSERT_EQ(en.paths.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto e = estimate_log_Z_is(condition_on_path(p, en.paths[k]), PriorProposal{}, 40000, k);
    EXPECT_NEAR(e.log_Z, exact[k], 3.0 * e.log_Z_se);
  }
}

TEST(Dominant, LeastSquaresSlopeNearTwo) {
  const Dataset d = gen_dominant(5000, 8);
  const Eigen::VectorXd x = d.x.col(0);
  const double slope = x.dot(d.y) / x.squaredNorm();
  const Eigen::VectorXd resid = d.y - slope * x;
  const double se = std::sqrt(resid.squaredNorm() / (5000.0 - 1.0) / x.squaredNorm());
  EXPECT_NEAR(slope, 2.0, 3.0 * se);
}

TEST(Dominant, PriorOnNoiseScale) {
  const Dataset d = gen_dominant(5, 1);
  const Trace t = run_forward(dominant_program(d, d), 4);
  const auto& rec = t.records.at(2);
  EXPECT_EQ(rec.address.name, "theta2");
  EXPECT_NEAR(rec.log_prior_term, -std::get<double>(rec.value), 1e-15);  // Gamma(1, 1) log density
}

TEST(Subset, ZetaValues) {
  EXPECT_EQ(subset_zeta(4, 4, 5), 25.0);
  EXPECT_EQ(subset_zeta(1, 4, 5), 4.0);
  EXPECT_EQ(subset_zeta(9, 4, 5), 0.0);
}

TEST(Subset, SignalVarianceIsFour) {
  const Eigen::VectorXd beta = subset_beta();
  ASSERT_EQ(beta.size(), 15);
  EXPECT_NEAR(beta.squaredNorm(), 4.0, 1e-12);
  // Simulated signal variance and signal-to-noise ratio.
  const Dataset d = gen_subset(200000, 5);
  const Eigen::VectorXd signal = d.x * beta;
  const double v = (signal.array() - signal.mean()).square().mean();
  EXPECT_NEAR(v, 4.0, 0.05);
  EXPECT_NEAR(v / (1.0 + v), 0.8, 0.003);
  EXPECT_NEAR(d.x.mean(), 5.0, 0.01);
}

TEST(Subset, FifteenSlps) {
  const Dataset d = gen_subset(10, 1);
  const auto en = enumerate_slps(subset_program(d, d), 128);
  EXPECT_EQ(en.paths.size(), 15u);
  EXPECT_FALSE(en.truncated);
}

TEST(Subset, QuadratureEvidenceMatchesIs) {
  const Dataset d = gen_subset(8, 2);
  const Program p = subset_program(d, d);
  const auto exact = subset_log_Z(d);
  const auto en = enumerate_slps(p, 128);
  BudgetConfig cfg;
  cfg.seed = 3;
  cfg.proposal = IsProposalKind::MomentMatched;
  cfg.is_proposals_per_slp = 20000;
  for (std::size_t k : {0u, 7u, 14u}) {
    const SlpEstimate e = run_slp(p, en.paths[k], k, cfg);
    ASSERT_FALSE(e.failed);
    EXPECT_NEAR(e.log_Z, exact[k], 3.0 * e.log_Z_se + 1e-3) << "SLP " << k;
  }
}

TEST(Grammar, ProductionProbabilities) {
  EXPECT_EQ(kPcfgProductionProbs, (std::array<double, 3>{0.4, 0.4, 0.2}));
}

TEST(Builtin, Registry) {
  for (const auto& name : builtin_model_names()) EXPECT_EQ(builtin_model(name).name, name);
  EXPECT_FALSE(static_cast<bool>(builtin_model("dominant").analytic_log_Z));
  EXPECT_TRUE(static_cast<bool>(builtin_model("subset").analytic_log_Z));
  EXPECT_THROW(builtin_model("nope"), Error);
}

TEST(DatasetOps, RowsAndConcat) {
  const Dataset d = gen_overlap(10, 1);
  const Dataset joined = Dataset::concat(d.rows(0, 4), d.rows(4, 6));
  EXPECT_EQ(joined.x, d.x);
  EXPECT_EQ(joined.y, d.y);
}
