#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mazero/oracles/oracles.hpp"
#include "mazero/oracles/suites.hpp"
#include "mazero/oslambda.hpp"

namespace mazero {
namespace {

std::vector<double> Sorted(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

TEST(KeepCount, CeilingWithMinimumOne) {
  EXPECT_EQ(KeepCount(4, 0.75), 1u);
  EXPECT_EQ(KeepCount(5, 0.75), 2u);
  EXPECT_EQ(KeepCount(1, 0.75), 1u);
  EXPECT_EQ(KeepCount(7, 0.0), 7u);
  EXPECT_EQ(KeepCount(10, 0.5), 5u);
  EXPECT_EQ(KeepCount(5, 0.75, QuantileRounding::kFloor), 1u);
}

TEST(TopQuantile, KeepsLargestQuarter) {
  const std::vector<double> u{1, 2, 3, 4};
  EXPECT_EQ(top_quantile(u, 0.75), std::vector<double>{4});
}

TEST(TopQuantile, ZeroRhoKeepsEverything) {
  const std::vector<double> u{3, -1, 2, 2};
  EXPECT_EQ(top_quantile(u, 0.0), (std::vector<double>{3, 2, 2, -1}));
}

TEST(TopQuantile, SingletonSurvives) {
  const std::vector<double> u{5};
  EXPECT_EQ(top_quantile(u, 0.75), std::vector<double>{5});
}

TEST(InsertReturn, FreshRootHasOnlyItsValue) {
  NodeStats root;
  InitNodeStats(root, 0.7);
  EXPECT_EQ(root.buckets.num_depths(), 1);
  EXPECT_EQ(Sorted(root.buckets.bucket(0)), std::vector<double>{0.7});
  EXPECT_EQ(root.visits, 1);
}

TEST(InsertReturn, ChainDiscountsReward) {
  NodeStats root, child;
  InitNodeStats(root, 0.0);
  InitNodeStats(child, 2.0);
  NodeStats* path[] = {&root, &child};
  const double rewards[] = {1.0};
  insert_return(path, rewards, 2.0, 0.5);
  ASSERT_EQ(root.buckets.num_depths(), 2);
  EXPECT_EQ(Sorted(root.buckets.bucket(1)), std::vector<double>{2.0});
}

TEST(InsertReturn, TwoChildrenEnumerated) {
  NodeStats root, c1, c2;
  InitNodeStats(root, 0.0);
  InitNodeStats(c1, 1.0);
  InitNodeStats(c2, 3.0);
  NodeStats* p1[] = {&root, &c1};
  NodeStats* p2[] = {&root, &c2};
  const double r1[] = {1.0};
  const double r2[] = {0.0};
  insert_return(p1, r1, 1.0, 1.0);
  insert_return(p2, r2, 3.0, 1.0);
  EXPECT_EQ(Sorted(root.buckets.bucket(1)), (std::vector<double>{2.0, 3.0}));
}

TEST(VLambda, LeafIsItsValue) {
  NodeStats leaf;
  InitNodeStats(leaf, -0.3);
  EXPECT_DOUBLE_EQ(v_lambda(leaf, 0.75, 0.8), -0.3);
}

TEST(VLambda, ChainWeights) {
  NodeStats root, child;
  InitNodeStats(root, 0.0);
  InitNodeStats(child, 2.0);
  NodeStats* path[] = {&root, &child};
  const double rewards[] = {1.0};
  insert_return(path, rewards, 2.0, 0.5);
  EXPECT_DOUBLE_EQ(v_lambda(root, 0.0, 1.0), 1.0);
  EXPECT_NEAR(v_lambda(root, 0.0, 0.5), 2.0 / 3.0, 1e-15);
}

TEST(VLambda, CacheInvalidatedByInsert) {
  DepthBuckets b;
  b.Insert(0, 1.0);
  EXPECT_DOUBLE_EQ(b.VLambda(0.0, 1.0), 1.0);
  b.Insert(1, 3.0);
  EXPECT_DOUBLE_EQ(b.VLambda(0.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(b.VLambda(0.0, 0.0), 1.0);
}

TEST(OptimisticAdvantage, Substitution) {
  EXPECT_NEAR(optimistic_advantage(1.0, 0.99, 2.0, 0.5), 2.48, 1e-15);
  EXPECT_EQ(optimistic_advantage(0.0, 0.99, 0.0, 0.0), 0.0);
  // One-step reduction: a leaf child's V is its own value.
  NodeStats leaf;
  InitNodeStats(leaf, 0.4);
  EXPECT_DOUBLE_EQ(optimistic_advantage(0.3, 1.0, v_lambda(leaf, 0.5, 0.8), 0.1), 0.3 + 0.4 - 0.1);
}

TEST(Backup, SingleSimulationOnFreshRoot) {
  NodeStats root, leaf;
  InitNodeStats(root, 0.5);
  InitNodeStats(leaf, 2.0);
  NodeStats* path[] = {&root, &leaf};
  const double rewards[] = {1.0};
  backup(path, rewards, 0.5, true);
  EXPECT_EQ(root.visits, 2);
  EXPECT_EQ(leaf.visits, 1);
  EXPECT_EQ(Sorted(root.buckets.bucket(1)), std::vector<double>{2.0});
  EXPECT_DOUBLE_EQ(root.value_sum, 0.5 + 2.0);
}

// Three backups on a fixed two-level tree compared with enumerating paths.
TEST(Backup, TwoLevelTreeMatchesEnumeration) {
  oracle::ExplicitTree t;
  t.parent = {-1, 0, 0, 1};
  t.value = {0.2, -0.4, 0.9, 0.3};
  t.reward = {0.0, 0.5, -0.1, 0.7};
  t.children = {{1, 2}, {3}, {}, {}};
  const double gamma = 0.9;
  std::vector<NodeStats> s(4);
  InitNodeStats(s[0], t.value[0]);
  for (int id = 1; id < 4; ++id) {
    InitNodeStats(s[id], t.value[id]);
    std::vector<NodeStats*> path;
    std::vector<double> rewards;
    for (int n = id; n >= 0; n = t.parent[n]) path.insert(path.begin(), &s[n]);
    for (int n = id; t.parent[n] >= 0; n = t.parent[n]) rewards.insert(rewards.begin(), t.reward[n]);
    backup(path, rewards, gamma, true);
  }
  const auto sets = oracle::ReturnSets(t, 0, gamma);
  ASSERT_EQ(s[0].buckets.num_depths(), static_cast<int>(sets.size()));
  for (std::size_t d = 0; d < sets.size(); ++d) {
    std::vector<double> want = sets[d];
    std::sort(want.begin(), want.end());
    const std::vector<double> got = Sorted(s[0].buckets.bucket(static_cast<int>(d)));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
  }
  // rho = 0, lambda = 1: plain mean of every bootstrapped return.
  double sum = 0.0, count = 0.0;
  for (const auto& set : sets) {
    sum += std::accumulate(set.begin(), set.end(), 0.0);
    count += static_cast<double>(set.size());
  }
  EXPECT_NEAR(v_lambda(s[0], 0.0, 1.0), sum / count, 1e-14);
  for (double rho : {0.0, 0.5, 0.75}) {
    for (double lambda : {0.5, 0.8, 1.0}) {
      EXPECT_NEAR(v_lambda(s[0], rho, lambda),
                  oracle::BruteVLambda(t, 0, gamma, {static_cast<int>(rho * 4), 4}, lambda), 1e-12);
    }
  }
}

TEST(OsLambdaOracle, RandomTreesAgree) {
  verify::VerifyOptions o;
  o.trees = 200;
  o.seed = 11;
  const verify::SuiteReport r = verify::OsLambdaSuite(o);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_LE(r.max_error, 1e-9);
}

TEST(OsLambdaOracle, FloorFaultIsDetected) {
  verify::VerifyOptions o;
  o.trees = 200;
  o.seed = 11;
  o.inject_quantile_floor = true;
  EXPECT_FALSE(verify::OsLambdaSuite(o).pass);
}

}  // namespace
}  // namespace mazero
