#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/query_sample.hpp"
#include "qdrs/stab_metrics.hpp"

namespace qdrs {

// ---------------------------------------------------------------------------
// sample size

struct SampleSizeParams {
  double dual_vc_dim = 1.0;  // D, supplied by the caller
  double delta = 0.05;       // failure probability
  double c_univ = 1.0;       // the unspecified universal constant
};

/// ceil((c/eta) * (D ln(1/eta) + ln(1/delta))).
inline std::size_t sample_size(const SampleSizeParams& params, double eta) {
  detail::require(eta > 0.0 && eta < 1.0, "sample_size: eta must be in (0,1)");
  detail::require(params.delta > 0.0 && params.delta < 1.0, "sample_size: delta must be in (0,1)");
  detail::require(params.dual_vc_dim >= 1.0, "sample_size: D must be >= 1");
  detail::require(params.c_univ > 0.0, "sample_size: c_univ must be > 0");
  const double m = (params.c_univ / eta) * (params.dual_vc_dim * -std::log(eta) + -std::log(params.delta));
  return static_cast<std::size_t>(std::ceil(m));
}

// ---------------------------------------------------------------------------
// stab-weighted complete graph

/// Per-point membership bitsets over a query sample: bit j of point i is set
/// iff query j contains point i. The stab weight of pair {a,b} is then
/// popcount(bits(a) xor bits(b)).
class MembershipBits {
 public:
  MembershipBits() = default;

  template <RangePredicate R>
  MembershipBits(const PointSet& points, std::span<const R> queries)
      : n_(points.size()), words_((queries.size() + 63) / 64), bits_(n_ * words_, 0) {
    if constexpr (requires(const R& r) { r.dim(); })
      for (const auto& q : queries) detail::require(q.dim() == points.dim(), "MembershipBits: dimension mismatch");
    for (std::size_t j = 0; j < queries.size(); ++j) {
      const std::uint64_t mask = std::uint64_t{1} << (j % 64);
      const std::size_t w = j / 64;
      for (Index i = 0; i < n_; ++i)
        if (queries[j].contains(points[i])) bits_[i * words_ + w] |= mask;
    }
  }

  std::size_t num_points() const noexcept { return n_; }

  std::uint32_t weight(Index a, Index b) const noexcept {
    const std::uint64_t* pa = bits_.data() + a * words_;
    const std::uint64_t* pb = bits_.data() + b * words_;
    std::uint32_t s = 0;
    for (std::size_t w = 0; w < words_; ++w) s += static_cast<std::uint32_t>(std::popcount(pa[w] ^ pb[w]));
    return s;
  }

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Complete graph on 0..n-1 with integer stab-count weights.
class WeightedEdgeGraph {
 public:
  WeightedEdgeGraph() = default;
  explicit WeightedEdgeGraph(std::size_t n) : n_(n), w_(n < 2 ? 0 : n * (n - 1) / 2, 0) {}

  std::size_t size() const noexcept { return n_; }

  std::uint32_t weight(Index a, Index b) const { return w_[slot(a, b)]; }
  void set_weight(Index a, Index b, std::uint32_t w) { w_[slot(a, b)] = w; }

  std::uint64_t total_weight(std::span<const Edge> edges) const {
    std::uint64_t s = 0;
    for (const auto& e : edges) s += weight(e.a, e.b);
    return s;
  }
  std::uint64_t total_weight(const SpanningTree& t) const { return total_weight(std::span<const Edge>(t.edges)); }

 private:
  std::size_t slot(Index a, Index b) const {
    detail::require(a != b && a < n_ && b < n_, "WeightedEdgeGraph: bad vertex pair");
    if (a > b) std::swap(a, b);
    // row-major upper triangle
    return a * (2 * n_ - a - 1) / 2 + (b - a - 1);
  }

  std::size_t n_ = 0;
  std::vector<std::uint32_t> w_;
};

template <RangePredicate R>
WeightedEdgeGraph build_weighted_graph(const PointSet& points, std::span<const R> queries) {
  const std::size_t n = points.size();
  detail::require(n >= 2, "build_weighted_graph: need at least 2 points");
  MembershipBits bits(points, queries);
  WeightedEdgeGraph g(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) g.set_weight(a, b, bits.weight(a, b));
  return g;
}

inline WeightedEdgeGraph build_weighted_graph(const PointSet& points, const QuerySample& sample) {
  return build_weighted_graph(points, std::span<const BallRange>(sample.queries));
}

// ---------------------------------------------------------------------------
// minimum spanning tree

/// Prim's algorithm over an implicit complete graph. Ties are broken by the
/// lexicographically smallest (weight, min endpoint, max endpoint) edge, which
/// makes the result unique. Each pair weight is evaluated at most once.
template <class WeightFn>
SpanningTree prim_mst(std::size_t n, WeightFn&& weight) {
  detail::require(n >= 1, "prim_mst: empty graph");
  using Key = std::tuple<std::uint64_t, Index, Index>;
  constexpr Key kInf{std::numeric_limits<std::uint64_t>::max(), 0, 0};
  SpanningTree tree;
  tree.n = n;
  tree.edges.reserve(n - 1);
  std::vector<Key> key(n, kInf);
  std::vector<Index> outside;
  outside.reserve(n);
  for (Index v = 1; v < n; ++v) outside.push_back(v);
  Index last = 0;
  // keys of distinct vertices are distinct tuples, so scan order is irrelevant
  while (!outside.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < outside.size(); ++k) {
      const Index u = outside[k];
      const Key cand{static_cast<std::uint64_t>(weight(last, u)), std::min(last, u), std::max(last, u)};
      if (cand < key[u]) key[u] = cand;
      if (key[u] < key[outside[best]]) best = k;
    }
    const Index v = outside[best];
    tree.edges.emplace_back(std::get<1>(key[v]), std::get<2>(key[v]));
    outside[best] = outside.back();
    outside.pop_back();
    last = v;
  }
  return tree;
}

inline SpanningTree min_stab_spanning_tree(const WeightedEdgeGraph& g) {
  detail::require(g.size() >= 2, "min_stab_spanning_tree: need at least 2 vertices");
  return prim_mst(g.size(), [&g](Index a, Index b) { return g.weight(a, b); });
}

/// Sample -> stab-weighted graph -> MST -> DFS path -> balanced partition tree.
template <RangePredicate R>
PartitionTree build_query_driven_tree(const PointSet& points, std::span<const R> queries, std::size_t leaf_capacity = 1) {
  detail::require(!points.empty(), "build_query_driven_tree: empty point set");
  if (points.size() == 1) return path_to_partition_tree(SpanningPath{{0}}, leaf_capacity);
  MembershipBits bits(points, queries);
  const SpanningTree mst = prim_mst(points.size(), [&bits](Index a, Index b) { return bits.weight(a, b); });
  return path_to_partition_tree(tree_to_path(mst), leaf_capacity);
}

inline PartitionTree build_query_driven_tree(const PointSet& points, const QuerySample& sample, std::size_t leaf_capacity = 1) {
  return build_query_driven_tree(points, std::span<const BallRange>(sample.queries), leaf_capacity);
}

/// Balanced tree over a uniformly random leaf order; the no-sample baseline.
inline PartitionTree random_order_tree(std::size_t n, std::size_t leaf_capacity, std::uint64_t seed) {
  detail::require(n >= 1, "random_order_tree: empty point set");
  SpanningPath path;
  path.order.resize(n);
  std::iota(path.order.begin(), path.order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(path.order.begin(), path.order.end(), rng);
  return path_to_partition_tree(path, leaf_capacity);
}

// ---------------------------------------------------------------------------
// brute-force oracles

/// All n^(n-2) labeled spanning trees on 0..n-1, one per Pruefer sequence.
inline std::vector<SpanningTree> enumerate_spanning_trees(std::size_t n) {
  detail::require(n >= 2, "enumerate_spanning_trees: need n >= 2");
  detail::require(n <= 8, "enumerate_spanning_trees: n > 8 refused");
  std::vector<SpanningTree> out;
  if (n == 2) {
    out.push_back({2, {Edge(0, 1)}});
    return out;
  }
  const std::size_t len = n - 2;
  std::vector<Index> seq(len, 0);
  std::vector<std::size_t> degree(n);
  while (true) {
    std::fill(degree.begin(), degree.end(), 1);
    for (Index s : seq) ++degree[s];
    SpanningTree t;
    t.n = n;
    for (Index s : seq) {
      Index leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      t.edges.emplace_back(leaf, s);
      --degree[leaf];
      --degree[s];
    }
    Index u = n, v = n;
    for (Index i = 0; i < n; ++i)
      if (degree[i] == 1) (u == n ? u : v) = i;
    t.edges.emplace_back(u, v);
    out.push_back(std::move(t));

    std::size_t k = 0;
    while (k < len && ++seq[k] == n) seq[k++] = 0;
    if (k == len) break;
  }
  return out;
}

/// A query distribution with finite support and explicit probabilities.
struct DiscreteQueryDistribution {
  std::vector<BallRange> support;
  std::vector<double> probabilities;

  void validate() const {
    detail::require(!support.empty() && support.size() == probabilities.size(),
                    "DiscreteQueryDistribution: support/probability size mismatch");
    double total = 0.0;
    for (double p : probabilities) {
      detail::require(p >= 0.0, "DiscreteQueryDistribution: negative probability");
      total += p;
    }
    detail::require(std::abs(total - 1.0) < 1e-9, "DiscreteQueryDistribution: probabilities must sum to 1");
  }
};

struct TreeEstimate {
  double expected = 0.0;   // E_q[sigma(tree, q)], exact
  double empirical = 0.0;  // sample mean
  double lower = 0.0;      // (5/8) E - 3/8
  double upper = 0.0;      // (11/8) E + 3/8
  bool inside = true;
};

struct EstimationReport {
  std::size_t sample_size = 0;
  std::size_t trees = 0;
  std::size_t violations = 0;
  std::vector<TreeEstimate> per_tree;
};

/// Draws m queries and checks, for every spanning tree of P, that the empirical
/// mean stab number lies in [(5/8)E - 3/8, (11/8)E + 3/8].
inline EstimationReport estimation_interval_check(const PointSet& points, const DiscreteQueryDistribution& dist,
                                                  std::size_t m, std::uint64_t seed) {
  dist.validate();
  detail::require(points.size() >= 2 && points.size() <= 6, "estimation_interval_check: need 2 <= n <= 6");
  detail::require(m >= 1, "estimation_interval_check: m must be >= 1");
  const std::size_t n = points.size();
  const std::size_t k = dist.support.size();

  // stabbed[pair][j]: does support query j stab pair
  std::vector<std::vector<bool>> inside(k, std::vector<bool>(n));
  for (std::size_t j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) inside[j][i] = ball_contains(dist.support[j], points[i]);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(dist.probabilities.begin(), dist.probabilities.end());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t s = 0; s < m; ++s) ++counts[pick(rng)];

  EstimationReport rep;
  rep.sample_size = m;
  for (const auto& tree : enumerate_spanning_trees(n)) {
    TreeEstimate est;
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t sigma = 0;
      for (const auto& e : tree.edges) sigma += inside[j][e.a] != inside[j][e.b] ? 1 : 0;
      est.expected += dist.probabilities[j] * static_cast<double>(sigma);
      est.empirical += static_cast<double>(counts[j] * sigma);
    }
    est.empirical /= static_cast<double>(m);
    est.lower = 0.625 * est.expected - 0.375;
    est.upper = 1.375 * est.expected + 0.375;
    est.inside = est.lower <= est.empirical && est.empirical <= est.upper;
    if (!est.inside) ++rep.violations;
    rep.per_tree.push_back(est);
  }
  rep.trees = rep.per_tree.size();
  return rep;
}

}  // namespace qdrs
