#include <gtest/gtest.h>

#include <random>

#include "qdrs/stab_metrics.hpp"
#include "test_util.hpp"

using namespace qdrs;

namespace {

PointSet star_points() { return PointSet::from_rows({{0.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}}); }
SpanningTree star_tree() { return {4, {Edge(0, 1), Edge(0, 2), Edge(0, 3)}}; }

}  // namespace

TEST(StabCount, TrivialQueries) {
  auto P = star_points();
  auto T = star_tree();
  EXPECT_EQ(stab_count(T, BallRange({0.0, 0.0}, 10.0), P), 0u);
  EXPECT_EQ(stab_count(T, BallRange({50.0, 50.0}, 1.0), P), 0u);
}

TEST(StabCount, StarAroundCenterStabsEveryEdge) {
  EXPECT_EQ(stab_count(star_tree(), BallRange({0.0, 0.0}, 0.5), star_points()), 3u);
}

TEST(StabCount, OutOfRangeEdgeIsUsageError) {
  SpanningTree bad{2, {Edge(0, 9)}};
  EXPECT_THROW(stab_count(bad, BallRange({0.0, 0.0}, 1.0), star_points()), usage_error);
}

TEST(StabCount, AdditiveOverEdges) {
  std::mt19937_64 rng(5);
  auto P = tu::random_points(20, 2, rng);
  auto T = tu::random_spanning_tree(20, rng);
  for (int k = 0; k < 100; ++k) {
    auto q = tu::random_ball(2, rng);
    std::size_t sum = 0;
    for (const auto& e : T.edges) {
      Edge one[] = {e};
      sum += stab_count(std::span<const Edge>(one), q, P);
    }
    ASSERT_EQ(sum, stab_count(T, q, P));
  }
}

TEST(VisitingNumber, RootOnlyWhenNothingStabbed) {
  auto P = PointSet::from_rows({{0.0, 0.0}, {10.0, 0.0}});
  auto T = path_to_partition_tree(SpanningPath{{0, 1}});
  EXPECT_EQ(visiting_number(T, BallRange({100.0, 0.0}, 1.0), P), 1u);
  EXPECT_EQ(visiting_number(T, BallRange({5.0, 0.0}, 100.0), P), 1u);
  EXPECT_EQ(visiting_number(T, BallRange({0.0, 0.0}, 1.0), P), 3u);
}

TEST(TreeToPath, Examples) {
  SpanningTree path_tree{4, {Edge(0, 1), Edge(1, 2), Edge(2, 3)}};
  EXPECT_EQ(tree_to_path(path_tree).order, (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(tree_to_path(star_tree()).order, (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(tree_to_path(SpanningTree{1, {}}).order, (std::vector<Index>{0}));
  EXPECT_THROW(tree_to_path(SpanningTree{3, {Edge(0, 1), Edge(0, 1)}}), usage_error);
}

TEST(TreeToPath, StarFactorTwoOnRandomBalls) {
  std::mt19937_64 rng(1);
  auto P = star_points();
  auto path = tree_to_path(star_tree());
  for (int k = 0; k < 1000; ++k) {
    auto q = tu::random_ball(2, rng, -1.5, 1.5, 1.5);
    ASSERT_LE(stab_count(path, q, P), 2 * stab_count(star_tree(), q, P));
  }
}

TEST(PathToPartitionTree, Structure) {
  auto single = path_to_partition_tree(SpanningPath{{0}});
  EXPECT_EQ(single.num_nodes(), 1u);

  SpanningPath p{{3, 1, 4, 0, 5, 2, 7, 6}};
  auto t = path_to_partition_tree(p);
  EXPECT_EQ(t.height(), 3u);
  EXPECT_EQ(t.num_nodes(), 15u);
  EXPECT_EQ(t.max_leaf_size(), 1u);
  std::vector<Index> leaves;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    const auto& nd = t.node(v);
    if (nd.is_leaf()) {
      leaves.push_back(t.points(v)[0]);
      continue;
    }
    stack.push_back(nd.right);
    stack.push_back(nd.left);
  }
  EXPECT_EQ(leaves, p.order);

  auto chunked = path_to_partition_tree(p, 3);
  EXPECT_LE(chunked.max_leaf_size(), 3u);
  EXPECT_THROW(path_to_partition_tree(p, 0), usage_error);
}

TEST(PartitionTreeToPath, RoundTripAndErrors) {
  EXPECT_EQ(partition_tree_to_path(path_to_partition_tree(SpanningPath{{1, 0}})).order, (std::vector<Index>{1, 0}));
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = tu::random_path(1 + rng() % 64, rng);
    ASSERT_EQ(partition_tree_to_path(path_to_partition_tree(p, 1)), p);
  }
  EXPECT_THROW(partition_tree_to_path(path_to_partition_tree(SpanningPath{{0, 1, 2}}, 2)), usage_error);
}

TEST(PartitionTree, RejectsInvalidLayouts) {
  using N = PartitionTree::Node;
  EXPECT_THROW(PartitionTree({0, 1}, {N{0, 1, -1, -1}}), usage_error);
  EXPECT_THROW(PartitionTree({0, 0}, {N{0, 2, -1, -1}}), usage_error);
  EXPECT_THROW(PartitionTree({0, 1, 2}, {N{0, 3, 1, 2}, N{0, 1, -1, -1}, N{2, 3, -1, -1}}), usage_error);
}

// The three stab/visiting inequalities on randomized instances.
TEST(StabBounds, DfsPathAtMostTwiceTreeStabbing) {
  std::mt19937_64 rng(100);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t n = 2 + rng() % 63, d = 1 + rng() % 4;
    auto P = tu::random_points(n, d, rng);
    auto T = tu::random_spanning_tree(n, rng);
    auto path = tree_to_path(T);
    for (int k = 0; k < 100; ++k) {
      auto q = tu::random_ball(d, rng);
      ASSERT_LE(stab_count(path, q, P), 2 * stab_count(T, q, P));
    }
  }
}

TEST(StabBounds, BalancedTreeVisitingBound) {
  std::mt19937_64 rng(101);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t n = 1 + rng() % 64, d = 1 + rng() % 4;
    auto P = tu::random_points(n, d, rng);
    auto path = tu::random_path(n, rng);
    auto T = path_to_partition_tree(path, 1);
    const std::size_t factor = 2 * ceil_log2(n) + 1;
    for (int k = 0; k < 100; ++k) {
      auto q = tu::random_ball(d, rng);
      ASSERT_LE(visiting_number(T, q, P), factor * stab_count(path, q, P) + 1);
    }
  }
}

TEST(StabBounds, BalancedTreeBoundOnSixteenPlanarPoints) {
  std::mt19937_64 rng(16);
  auto P = tu::random_points(16, 2, rng);
  auto path = tu::random_path(16, rng);
  auto T = path_to_partition_tree(path, 1);
  for (int k = 0; k < 500; ++k) {
    auto q = tu::random_ball(2, rng);
    ASSERT_LE(visiting_number(T, q, P), 9 * stab_count(path, q, P) + 1);
  }
}

TEST(StabBounds, LeafPathAtMostVisitingNumber) {
  std::mt19937_64 rng(102);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t n = 1 + rng() % 64, d = 1 + rng() % 4;
    auto P = tu::random_points(n, d, rng);
    auto T = tu::random_partition_tree(n, rng);
    auto path = partition_tree_to_path(T);
    for (int k = 0; k < 100; ++k) {
      auto q = tu::random_ball(d, rng);
      ASSERT_LE(stab_count(path, q, P), visiting_number(T, q, P));
    }
  }
}

TEST(StabBounds, TwelvePointRandomTree) {
  std::mt19937_64 rng(12);
  auto P = tu::random_points(12, 2, rng);
  auto T = tu::random_partition_tree(12, rng);
  auto path = partition_tree_to_path(T);
  for (int k = 0; k < 500; ++k) {
    auto q = tu::random_ball(2, rng);
    ASSERT_LE(stab_count(path, q, P), visiting_number(T, q, P));
  }
}
