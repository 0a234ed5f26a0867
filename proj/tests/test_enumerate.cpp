#include <cmath>

#include <gtest/gtest.h>

#include "slpstack/enumerate.hpp"
#include "slpstack/inference.hpp"
#include "slpstack/models.hpp"

using namespace slpstack;

TEST(Enumerate, DistinctHasTwoPathsInIndexOrder) {
  const Dataset d = gen_distinct(10, 1);
  const Enumeration en = enumerate_slps(distinct_program(d, d), 16);
  ASSERT_EQ(en.paths.size(), 2u);
  EXPECT_FALSE(en.truncated);
  EXPECT_EQ(en.paths[0].branches().at(0).second, 1);
  EXPECT_EQ(en.paths[1].branches().at(0).second, 2);
}

TEST(Enumerate, NoBranchGivesOnePath) {
  const Program p("flat", [](Handler& h) {
    h.sample("x", Distribution::normal(0, 1));
    h.sample_discrete("c", Distribution::bernoulli(0.5));
    return std::vector<double>{};
  });
  const Enumeration en = enumerate_slps(p, 8);
  EXPECT_EQ(en.paths.size(), 1u);
}

TEST(Enumerate, GrammarTruncatesAt128InBfsOrder) {
  const Enumeration en = enumerate_slps(pcfg_program(), 128);
  ASSERT_EQ(en.paths.size(), 128u);
  EXPECT_TRUE(en.truncated);
  EXPECT_EQ(en.paths[0].to_strings(), (std::vector<std::string>{"e:0=0"}));
  for (std::size_t i = 1; i < en.paths.size(); ++i)
    EXPECT_LE(en.paths[i - 1].branches().size(), en.paths[i].branches().size());
  std::set<std::string> keys;
  for (const auto& p : en.paths) keys.insert(p.key());
  EXPECT_EQ(keys.size(), 128u);
}

TEST(Enumerate, IsDeterministic) {
  const auto a = enumerate_slps(pcfg_program(), 40, 3);
  const auto b = enumerate_slps(pcfg_program(), 40, 3);
  EXPECT_EQ(a.paths, b.paths);
}

TEST(Enumerate, DetectsUnannotatedBranch) {
  const Program p("hidden", [](Handler& h) {
    const double u = h.sample("u", Distribution::normal(0, 1));
    if (u > 0) h.sample("extra", Distribution::normal(0, 1));
    return std::vector<double>{};
  });
  try {
    enumerate_slps(p, 8, 0, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnannotatedBranchSuspected);
  }
}

TEST(Enumerate, PinnedProgramHasOnePath) {
  const Dataset d = gen_distinct(10, 1);
  const Program p = distinct_program(d, d);
  const auto en = enumerate_slps(p, 16);
  for (const auto& path : en.paths) {
    const auto sub = enumerate_slps(condition_on_path(p, path), 16);
    ASSERT_EQ(sub.paths.size(), 1u);
    EXPECT_EQ(sub.paths[0], path);
  }
}

TEST(Enumerate, PriorPathProbabilities) {
  const Dataset d = gen_distinct(5, 1);
  const Program p = distinct_program(d, d);
  const auto en = enumerate_slps(p, 16);
  const std::size_t n = 20000;
  const auto pp = estimate_prior_path_prob(p, en.paths, n, 4);
  const double tol = 3.0 * std::sqrt(0.25 / n);
  EXPECT_NEAR(pp.prob[0], 0.5, tol);
  EXPECT_NEAR(pp.prob[1], 0.5, tol);
  EXPECT_DOUBLE_EQ(pp.other, 0.0);

  const Program g = pcfg_program();
  const auto eg = enumerate_slps(g, 128);
  const auto pg = estimate_prior_path_prob(g, eg.paths, n, 5);
  EXPECT_NEAR(pg.prob[0], 0.4, 3.0 * std::sqrt(0.24 / n));
  EXPECT_GT(pg.other, 0.0);
}

TEST(Enumerate, SingleSlpProbabilityIsOne) {
  const Program p("flat", [](Handler& h) {
    h.sample("x", Distribution::normal(0, 1));
    return std::vector<double>{};
  });
  const auto en = enumerate_slps(p, 4);
  EXPECT_DOUBLE_EQ(estimate_prior_path_prob(p, en.paths, 100, 1).prob[0], 1.0);
}

TEST(Enumerate, ZeroMaxRejected) { EXPECT_THROW(enumerate_slps(pcfg_program(), 0), Error); }
