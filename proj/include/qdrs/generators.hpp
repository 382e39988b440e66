#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/query_sample.hpp"

namespace qdrs {

enum class PointGenerator { normal, uniform_box, gaussian_mixture };

inline const char* to_string(PointGenerator g) noexcept {
  switch (g) {
    case PointGenerator::normal: return "normal";
    case PointGenerator::uniform_box: return "uniform";
    case PointGenerator::gaussian_mixture: return "mixture";
  }
  return "?";
}

inline PointGenerator parse_point_generator(const std::string& s) {
  if (s == "normal") return PointGenerator::normal;
  if (s == "uniform") return PointGenerator::uniform_box;
  if (s == "mixture") return PointGenerator::gaussian_mixture;
  throw usage_error("unknown point generator '" + s + "' (expected normal, uniform or mixture)");
}

struct PointSpec {
  PointGenerator kind = PointGenerator::normal;
  std::size_t n = 1000;
  std::size_t dim = 2;
  std::uint64_t seed = 0;
  // uniform box [lo, hi]^d
  double lo = 0.0;
  double hi = 1.0;
  // mixture: cluster means ~ N(0, spread^2 I), members ~ N(mean, cluster_sd^2 I)
  std::size_t clusters = 10;
  double spread = 5.0;
  double cluster_sd = 1.0;

  void validate() const {
    detail::require(n >= 1 && dim >= 1, "PointSpec: n and dim must be >= 1");
    detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "PointSpec: need lo < hi");
    detail::require(clusters >= 1, "PointSpec: clusters must be >= 1");
    detail::require(spread >= 0.0 && cluster_sd > 0.0 && std::isfinite(spread) && std::isfinite(cluster_sd),
                    "PointSpec: bad mixture spread");
  }
};

inline PointSet generate_points(const PointSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> c(spec.n * spec.dim);
  switch (spec.kind) {
    case PointGenerator::normal:
      for (double& x : c) x = g(rng);
      break;
    case PointGenerator::uniform_box: {
      std::uniform_real_distribution<double> u(spec.lo, spec.hi);
      for (double& x : c) x = std::min(u(rng), spec.hi);
      break;
    }
    case PointGenerator::gaussian_mixture: {
      std::vector<double> means(spec.clusters * spec.dim);
      for (double& m : means) m = spec.spread * g(rng);
      std::uniform_int_distribution<std::size_t> pick(0, spec.clusters - 1);
      for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t k = pick(rng);
        for (std::size_t j = 0; j < spec.dim; ++j) c[i * spec.dim + j] = means[k * spec.dim + j] + spec.cluster_sd * g(rng);
      }
      break;
    }
  }
  return PointSet(spec.dim, std::move(c));
}

struct CoordinateStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population
};

inline CoordinateStats coordinate_stats(const PointSet& p) {
  detail::require(!p.empty(), "coordinate_stats: empty point set");
  const std::size_t d = p.dim();
  CoordinateStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (Index i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += p[i][k];
  for (double& m : s.mean) m /= static_cast<double>(p.size());
  for (Index i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) s.variance[k] += (p[i][k] - s.mean[k]) * (p[i][k] - s.mean[k]);
  for (double& v : s.variance) v /= static_cast<double>(p.size());
  return s;
}

// ---------------------------------------------------------------------------
// query distributions

/// Centers ~ N(0, center_sd^2 I), radii = |N(0, radius_sd^2)|.
struct BallQuerySpec {
  std::size_t m = 1000;
  std::size_t dim = 2;
  std::uint64_t seed = 0;
  double center_sd = 1.0;
  double radius_sd = 4.0;
};

inline QuerySample generate_ball_queries(const BallQuerySpec& spec) {
  detail::require(spec.dim >= 1, "BallQuerySpec: dim must be >= 1");
  detail::require(spec.center_sd >= 0.0 && spec.radius_sd >= 0.0 && std::isfinite(spec.center_sd) &&
                      std::isfinite(spec.radius_sd),
                  "BallQuerySpec: spreads must be finite and >= 0");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  QuerySample s;
  s.source_seed = spec.seed;
  s.queries.reserve(spec.m);
  for (std::size_t k = 0; k < spec.m; ++k) {
    std::vector<double> c(spec.dim);
    for (double& x : c) x = spec.center_sd * g(rng);
    s.queries.emplace_back(std::move(c), std::abs(spec.radius_sd * g(rng)));
  }
  return s;
}

/// `per_point` queries per point of P, centered at the point plus N(0, jitter^2 I)
/// noise, all with the fixed search radius.
struct NearPointQuerySpec {
  std::size_t per_point = 2;
  double jitter = 0.5;
  double radius = 1.5;
  std::uint64_t seed = 0;
};

inline QuerySample generate_near_point_queries(const PointSet& points, const NearPointQuerySpec& spec) {
  detail::require(!points.empty(), "generate_near_point_queries: empty point set");
  detail::require(spec.per_point >= 1, "NearPointQuerySpec: per_point must be >= 1");
  detail::require(spec.jitter >= 0.0 && std::isfinite(spec.jitter), "NearPointQuerySpec: bad jitter");
  detail::require(spec.radius > 0.0 && std::isfinite(spec.radius), "NearPointQuerySpec: radius must be > 0");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  QuerySample s;
  s.source_seed = spec.seed;
  s.queries.reserve(points.size() * spec.per_point);
  for (Index i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < spec.per_point; ++k) {
      std::vector<double> c(points[i].begin(), points[i].end());
      if (spec.jitter > 0.0)
        for (double& x : c) x += spec.jitter * g(rng);
      s.queries.emplace_back(std::move(c), spec.radius);
    }
  }
  return s;
}

/// `m` queries, each centered at a uniformly drawn point of P plus
/// N(0, jitter^2 I) noise, all with the fixed search radius.
inline QuerySample sample_near_point_queries(const PointSet& points, std::size_t m, double jitter, double radius,
                                             std::uint64_t seed) {
  detail::require(!points.empty(), "sample_near_point_queries: empty point set");
  detail::require(jitter >= 0.0 && std::isfinite(jitter), "sample_near_point_queries: bad jitter");
  detail::require(radius > 0.0 && std::isfinite(radius), "sample_near_point_queries: radius must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<Index> pick(0, points.size() - 1);
  QuerySample s;
  s.source_seed = seed;
  s.queries.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto x = points[pick(rng)];
    std::vector<double> c(x.begin(), x.end());
    if (jitter > 0.0)
      for (double& v : c) v += jitter * g(rng);
    s.queries.emplace_back(std::move(c), radius);
  }
  return s;
}

// ---------------------------------------------------------------------------
// random projection

/// Multiplies by a k x d matrix with i.i.d. N(0, 1/k) entries.
inline PointSet jl_project_raw(const PointSet& p, std::size_t k, std::uint64_t seed) {
  detail::require(k >= 1, "jl_project: target dimension must be >= 1");
  detail::require(k <= p.dim(), "jl_project: target dimension exceeds input dimension");
  detail::require(!p.empty(), "jl_project: empty point set");
  const std::size_t d = p.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  std::vector<double> a(k * d);
  for (double& x : a) x = g(rng);
  std::vector<double> out(p.size() * k, 0.0);
  for (Index i = 0; i < p.size(); ++i) {
    const auto x = p[i];
    for (std::size_t r = 0; r < k; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += a[r * d + j] * x[j];
      out[i * k + r] = s;
    }
  }
  return PointSet(k, std::move(out));
}

/// Shifts and scales each coordinate to zero mean and unit variance
/// (constant coordinates are only centered).
inline PointSet standardize_coordinates(const PointSet& p) {
  const auto st = coordinate_stats(p);
  std::vector<double> c = p.coords();
  const std::size_t d = p.dim();
  for (Index i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double sd = std::sqrt(st.variance[k]);
      c[i * d + k] = (c[i * d + k] - st.mean[k]) / (sd > 0.0 ? sd : 1.0);
    }
  return PointSet(d, std::move(c));
}

inline PointSet jl_project(const PointSet& p, std::size_t k, std::uint64_t seed) {
  return standardize_coordinates(jl_project_raw(p, k, seed));
}

}  // namespace qdrs
