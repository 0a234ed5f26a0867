#include <gtest/gtest.h>

#include "slpstack/partition.hpp"

using namespace slpstack;

namespace {

Trace on_path(std::int64_t branch, double x) {
  Trace t;
  t.records.push_back({Address{"k", 0}, branch, 0.0, true});
  t.records.push_back({Address{"x", 0}, x, 0.0, false});
  return t;
}

WeightedSamples make(const std::vector<std::int64_t>& branches, const std::vector<double>& weights) {
  WeightedSamples s;
  for (std::size_t i = 0; i < branches.size(); ++i) s.traces.push_back(on_path(branches[i], static_cast<double>(i)));
  s.weights = weights;
  return s;
}

}  // namespace

TEST(Partition, SinglePath) {
  const auto table = partition(make({1, 1, 1}, {0.2, 0.3, 0.5}));
  ASSERT_EQ(table.size(), 1u);
  EXPECT_NEAR(table.groups[0].mass, 1.0, 1e-15);
}

TEST(Partition, AlternatingPaths) {
  const auto table = partition(make({1, 2, 1, 2}, {0.25, 0.25, 0.25, 0.25}));
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.groups[0].indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(table.groups[1].indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_DOUBLE_EQ(table.groups[0].mass, 0.5);
  EXPECT_DOUBLE_EQ(table.groups[1].mass, 0.5);
}

TEST(Partition, WeightedMasses) {
  const auto table = partition(make({1, 2, 2, 2}, {0.7, 0.1, 0.1, 0.1}));
  EXPECT_NEAR(table.groups[0].mass, 0.7, 1e-15);
  EXPECT_NEAR(table.groups[1].mass, 0.3, 1e-15);
}

TEST(Partition, EmptyInputGivesEmptyTable) { EXPECT_EQ(partition(WeightedSamples{}).size(), 0u); }

TEST(Partition, EnumerationOrderKeepsEmptyGroups) {
  const std::vector<AddressPath> order{on_path(3, 0).path(), on_path(2, 0).path(), on_path(1, 0).path()};
  const auto table = partition(make({1, 1}, {0.5, 0.5}), order);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_TRUE(table.groups[0].indices.empty());
  EXPECT_EQ(table.groups[2].indices.size(), 2u);
}

TEST(Reweight, MassesAsWeightsIsIdentity) {
  const auto s = make({1, 2, 2, 1}, {0.4, 0.1, 0.2, 0.3});
  const auto table = partition(s);
  const auto out = reweight(s, table, WeightVector(table.masses()));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(out.weights[i], s.weights[i], 1e-15);
}

TEST(Reweight, ScalesEachSlp) {
  const auto s = make({1, 1, 2}, {0.45, 0.45, 0.1});
  const auto table = partition(s);
  const auto out = reweight(s, table, WeightVector({0.5, 0.5}));
  EXPECT_NEAR(out.weights[0], 0.45 * 0.5 / 0.9, 1e-15);
  EXPECT_NEAR(out.weights[2], 0.1 * 0.5 / 0.1, 1e-15);
}

TEST(Reweight, CollapsedWeightZeroesSlp) {
  const auto s = make({1, 2, 2}, {0.5, 0.25, 0.25});
  const auto out = reweight(s, partition(s), WeightVector({1.0, 0.0}));
  EXPECT_EQ(out.weights[1], 0.0);
  EXPECT_EQ(out.weights[2], 0.0);
  EXPECT_DOUBLE_EQ(out.weights[0], 1.0);
}

TEST(Reweight, ErrorsOnMismatch) {
  const auto s = make({1, 2}, {0.5, 0.5});
  const auto table = partition(s);
  EXPECT_THROW(reweight(s, table, WeightVector({1.0})), Error);
  const std::vector<AddressPath> order{on_path(1, 0).path(), on_path(2, 0).path(), on_path(7, 0).path()};
  const auto t3 = partition(s, order);
  try {
    reweight(s, t3, WeightVector({0.2, 0.2, 0.6}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroMassSlp);
  }
}

TEST(WeightedSamples, RejectsBadWeights) {
  EXPECT_THROW(partition(make({1, 2}, {0.5, 0.6})), Error);
  EXPECT_THROW(partition(make({1, 2}, {-0.5, 1.5})), Error);
}
