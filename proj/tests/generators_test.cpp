#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qdrs/generators.hpp"
#include "qdrs/io.hpp"

namespace qdrs {
namespace {

TEST(Points, StandardNormalMomentsAtLargeN) {
  PointSpec s;
  s.n = 100000;
  s.dim = 15;
  s.seed = 12;
  const auto st = coordinate_stats(generate_points(s));
  for (std::size_t k = 0; k < 15; ++k) {
    EXPECT_NEAR(st.mean[k], 0.0, 0.02) << k;
    EXPECT_NEAR(st.variance[k], 1.0, 0.05) << k;
  }
}

TEST(Points, UniformBoxStaysInside) {
  PointSpec s;
  s.kind = PointGenerator::uniform_box;
  s.n = 20000;
  s.dim = 5;
  const auto p = generate_points(s);
  const auto [lo, hi] = std::minmax_element(p.coords().begin(), p.coords().end());
  EXPECT_GE(*lo, 0.0);
  EXPECT_LE(*hi, 1.0);
  EXPECT_LT(*lo, 0.01);
  EXPECT_GT(*hi, 0.99);
}

TEST(Points, SameSeedSameFile) {
  for (auto kind : {PointGenerator::normal, PointGenerator::uniform_box, PointGenerator::gaussian_mixture}) {
    PointSpec s;
    s.kind = kind;
    s.n = 200;
    s.dim = 3;
    s.seed = 77;
    std::ostringstream a, b;
    io::write_points_csv(a, generate_points(s));
    io::write_points_csv(b, generate_points(s));
    EXPECT_EQ(a.str(), b.str());
    s.seed = 78;
    std::ostringstream c;
    io::write_points_csv(c, generate_points(s));
    EXPECT_NE(a.str(), c.str());
  }
}

TEST(Points, MixtureIsClustered) {
  PointSpec s;
  s.kind = PointGenerator::gaussian_mixture;
  s.n = 5000;
  s.dim = 4;
  s.clusters = 3;
  s.spread = 20.0;
  s.cluster_sd = 0.5;
  const auto st = coordinate_stats(generate_points(s));
  // between-cluster spread dominates the within-cluster variance
  double total = 0.0;
  for (double v : st.variance) total += v;
  EXPECT_GT(total / 4.0, 10.0 * 0.25);
}

TEST(Points, InvalidSpecIsUsageError) {
  PointSpec s;
  s.n = 0;
  EXPECT_THROW(generate_points(s), usage_error);
  s.n = 5;
  s.kind = PointGenerator::uniform_box;
  s.lo = 1.0;
  s.hi = 1.0;
  EXPECT_THROW(generate_points(s), usage_error);
  EXPECT_THROW(parse_point_generator("poisson"), usage_error);
  EXPECT_EQ(parse_point_generator(to_string(PointGenerator::gaussian_mixture)), PointGenerator::gaussian_mixture);
}

TEST(BallQueries, FoldedNormalRadii) {
  BallQuerySpec s;
  s.m = 100000;
  s.dim = 2;
  s.seed = 3;
  const auto q = generate_ball_queries(s);
  ASSERT_EQ(q.size(), s.m);
  double sum = 0.0;
  for (const auto& b : q.queries) {
    EXPECT_GE(b.radius, 0.0);
    sum += b.radius;
  }
  const double expected = 4.0 * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(expected, 3.192, 1e-3);
  EXPECT_NEAR(sum / static_cast<double>(s.m), expected, 0.02 * expected);
}

TEST(BallQueries, CentersAreStandardNormal) {
  BallQuerySpec s;
  s.m = 50000;
  s.dim = 3;
  s.seed = 4;
  const auto st = coordinate_stats(generate_ball_queries(s).centers());
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(st.mean[k], 0.0, 0.03);
    EXPECT_NEAR(st.variance[k], 1.0, 0.05);
  }
}

TEST(NearPointQueries, ZeroJitterGivesThePoints) {
  PointSpec ps;
  ps.n = 50;
  ps.dim = 3;
  const auto p = generate_points(ps);
  NearPointQuerySpec s;
  s.jitter = 0.0;
  const auto q = generate_near_point_queries(p, s);
  ASSERT_EQ(q.size(), 100u);
  for (std::size_t k = 0; k < q.size(); ++k) {
    const auto x = p[k / 2];
    EXPECT_TRUE(std::equal(x.begin(), x.end(), q.queries[k].center.begin()));
    EXPECT_EQ(q.queries[k].radius, 1.5);
  }
}

TEST(NearPointQueries, JitterIsGaussian) {
  PointSpec ps;
  ps.n = 5000;
  ps.dim = 2;
  const auto p = generate_points(ps);
  NearPointQuerySpec s;
  s.per_point = 1;
  const auto q = generate_near_point_queries(p, s);
  double ss = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) ss += squared_distance(p[k], q.queries[k].center);
  // E|noise|^2 = d jitter^2
  EXPECT_NEAR(ss / static_cast<double>(q.size()), 2.0 * 0.25, 0.03);
}

TEST(NearPointQueries, SampledVariantDrawsFromThePoints) {
  PointSpec ps;
  ps.n = 30;
  ps.dim = 2;
  const auto p = generate_points(ps);
  const auto q = sample_near_point_queries(p, 200, 0.0, 0.7, 5);
  ASSERT_EQ(q.size(), 200u);
  for (const auto& b : q.queries) {
    EXPECT_EQ(b.radius, 0.7);
    bool found = false;
    for (Index i = 0; i < p.size() && !found; ++i) found = squared_distance(p[i], b.center) == 0.0;
    EXPECT_TRUE(found);
  }
  EXPECT_THROW(sample_near_point_queries(p, 5, 0.1, 0.0, 1), usage_error);
}

TEST(JlProjection, OutputIsStandardized) {
  PointSpec ps;
  ps.kind = PointGenerator::gaussian_mixture;
  ps.n = 1000;
  ps.dim = 40;
  const auto y = jl_project(generate_points(ps), 15, 2);
  ASSERT_EQ(y.dim(), 15u);
  const auto st = coordinate_stats(y);
  for (std::size_t k = 0; k < 15; ++k) {
    EXPECT_NEAR(st.mean[k], 0.0, 1e-10);
    EXPECT_NEAR(st.variance[k], 1.0, 1e-10);
  }
}

double distance_ratio(const PointSet& a, const PointSet& b, Index i, Index j) {
  return distance(b[i], b[j]) / distance(a[i], a[j]);
}

TEST(JlProjection, RawProjectionPreservesMostDistances) {
  PointSpec ps;
  ps.n = 1000;
  ps.dim = 100;
  ps.seed = 6;
  const auto x = generate_points(ps);
  const auto y = jl_project_raw(x, 15, 7);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Index> pick(0, x.size() - 1);
  std::size_t inside = 0, total = 0;
  for (int k = 0; k < 20000; ++k) {
    const Index i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const double r = distance_ratio(x, y, i, j);
    inside += (r >= 0.5 && r <= 1.5) ? 1 : 0;
    ++total;
  }
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.99);
}

TEST(JlProjection, FullDimensionMedianRatioNearOne) {
  PointSpec ps;
  ps.n = 500;
  ps.dim = 20;
  const auto x = generate_points(ps);
  const auto y = jl_project_raw(x, 20, 3);
  std::vector<double> ratios;
  for (Index i = 0; i + 1 < x.size(); i += 2) ratios.push_back(distance_ratio(x, y, i, i + 1));
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  EXPECT_NEAR(ratios[ratios.size() / 2], 1.0, 0.1);
}

TEST(JlProjection, TargetAboveInputIsUsageError) {
  PointSpec ps;
  ps.n = 10;
  ps.dim = 3;
  EXPECT_THROW(jl_project(generate_points(ps), 4, 1), usage_error);
  EXPECT_THROW(jl_project(generate_points(ps), 0, 1), usage_error);
}

TEST(Standardize, ConstantCoordinateIsOnlyCentered) {
  const PointSet p = PointSet::from_rows({{1.0, 5.0}, {3.0, 5.0}, {5.0, 5.0}});
  const auto s = standardize_coordinates(p);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(s[i][1], 0.0);
  const auto st = coordinate_stats(s);
  EXPECT_NEAR(st.variance[0], 1.0, 1e-12);
}

}  // namespace
}  // namespace qdrs
