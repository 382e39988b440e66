#include <gtest/gtest.h>

#include <random>

#include "qdrs/geometry.hpp"
#include "test_util.hpp"

using namespace qdrs;

TEST(Geometry, BallContainsCenterAndBoundary) {
  BallRange q({0.0, 0.0, 0.0}, 1.0);
  std::vector<double> origin{0.0, 0.0, 0.0}, unit{1.0, 0.0, 0.0};
  EXPECT_TRUE(ball_contains(q, origin));
  EXPECT_TRUE(ball_contains(q, unit));
}

TEST(Geometry, BallExcludesPointAtDistanceFive) {
  BallRange q({3.0, 4.0}, 4.9);
  std::vector<double> x{0.0, 0.0};
  EXPECT_FALSE(ball_contains(q, x));
  EXPECT_TRUE(ball_contains(BallRange({3.0, 4.0}, 5.0), x));
}

TEST(Geometry, DimensionMismatchIsUsageError) {
  BallRange q({0.0, 0.0}, 1.0);
  std::vector<double> x{0.0, 0.0, 0.0};
  EXPECT_THROW(ball_contains(q, x), usage_error);
  EXPECT_THROW(ring_contains(Ring({0.0}, 1.0, 2.0), x), usage_error);
}

TEST(Geometry, InvalidConstruction) {
  EXPECT_THROW(BallRange({0.0}, -1.0), usage_error);
  EXPECT_THROW(Ring({0.0}, 2.0, 1.0), usage_error);
  EXPECT_THROW(PointSet(2, {1.0, 2.0, 3.0}), usage_error);
  EXPECT_THROW(PointSet(1, {std::nan("")}), usage_error);
}

TEST(Geometry, RingClosedOnBothBoundaries) {
  Ring ring({0.0, 0.0}, 1.0, 3.0);
  std::vector<double> mid{2.0, 0.0}, in{0.5, 0.0}, inner_edge{1.0, 0.0}, outer_edge{0.0, 3.0}, out{3.5, 0.0};
  EXPECT_TRUE(ring_contains(ring, mid));
  EXPECT_FALSE(ring_contains(ring, in));
  EXPECT_TRUE(ring_contains(ring, inner_edge));
  EXPECT_TRUE(ring_contains(ring, outer_edge));
  EXPECT_FALSE(ring_contains(ring, out));
}

TEST(Geometry, StabsThreeWay) {
  auto P = PointSet::from_rows({{0.0, 0.0}, {10.0, 0.0}});
  std::vector<Index> all{0, 1};
  EXPECT_EQ(stabs(BallRange({0.0, 0.0}, 1.0), P, all), StabResult::stabbed);
  EXPECT_EQ(stabs(BallRange({5.0, 0.0}, 100.0), P, all), StabResult::full);
  EXPECT_EQ(stabs(BallRange({5.0, 50.0}, 1.0), P, all), StabResult::empty);
  EXPECT_THROW(stabs(BallRange({0.0, 0.0}, 1.0), P, std::span<const Index>{}), usage_error);
  std::vector<Index> bad{0, 7};
  EXPECT_THROW(stabs(BallRange({0.0, 0.0}, 1.0), P, bad), usage_error);
}

TEST(GeometryProperty, StabsMatchesBruteForceAndIsMonotone) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    auto P = tu::random_points(n, 2, rng);
    auto q = tu::random_ball(2, rng);
    std::vector<Index> all(n);
    std::iota(all.begin(), all.end(), Index{0});
    std::size_t in = 0;
    for (Index i = 0; i < n; ++i) in += q.contains(P[i]) ? 1 : 0;
    const auto expect = in == 0 ? StabResult::empty : (in == n ? StabResult::full : StabResult::stabbed);
    const auto got = stabs(q, P, all);
    ASSERT_EQ(got, expect);
    if (got != StabResult::stabbed && n > 1) {
      std::vector<Index> sub(all.begin(), all.begin() + 1 + rng() % (n - 1));
      ASSERT_EQ(stabs(q, P, sub), got);
    }
  }
}

TEST(GeometryProperty, BallContainsTranslationInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    // dyadic coordinates so translation is exact in floating point
    auto dy = [&] { return std::round(u(rng) * 64.0) / 64.0; };
    std::vector<double> c{dy(), dy()}, x{dy(), dy()}, t{dy(), dy()};
    BallRange q(c, std::abs(dy()));
    std::vector<double> c2{c[0] + t[0], c[1] + t[1]}, x2{x[0] + t[0], x[1] + t[1]};
    ASSERT_EQ(ball_contains(q, x), ball_contains(BallRange(c2, q.radius), x2));
  }
}
