#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/stab_metrics.hpp"

namespace qdrs {

/// Cheap per-node bounds used to settle the three-way node test without
/// scanning P_v: an axis-aligned box and a bounding ball around the centroid.
struct NodeSummary {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> centroid;
  double ball_radius = 0.0;
  std::size_t count = 0;
};

enum class QueryMode { exact, classifier };

inline const char* to_string(QueryMode m) noexcept { return m == QueryMode::exact ? "exact" : "classifier"; }

struct QueryReport {
  std::vector<Index> result;
  std::size_t nodes_visited = 0;  // root + children of nodes judged stabbed
  std::int64_t wall_time_ns = 0;
  QueryMode mode = QueryMode::exact;
};

/// A partition tree bound to its point set, with node summaries.
class PartitionIndex {
 public:
  PartitionIndex(const PartitionTree& tree, const PointSet& points) : tree_(&tree), points_(&points) {
    detail::require(tree.num_points() == points.size(), "PartitionIndex: tree/point set size mismatch");
    const std::size_t d = points.dim();
    summaries_.resize(tree.num_nodes());
    for (std::size_t v = 0; v < tree.num_nodes(); ++v) {
      auto& s = summaries_[v];
      const auto ids = tree.points(v);
      s.count = ids.size();
      s.lo.assign(d, std::numeric_limits<double>::infinity());
      s.hi.assign(d, -std::numeric_limits<double>::infinity());
      s.centroid.assign(d, 0.0);
      for (Index i : ids) {
        const auto p = points[i];
        for (std::size_t k = 0; k < d; ++k) {
          s.lo[k] = std::min(s.lo[k], p[k]);
          s.hi[k] = std::max(s.hi[k], p[k]);
          s.centroid[k] += p[k];
        }
      }
      for (double& c : s.centroid) c /= static_cast<double>(ids.size());
      double r2 = 0.0;
      for (Index i : ids) r2 = std::max(r2, squared_distance(s.centroid, points[i]));
      // slack so that rounding in the bound can only make the fast test more conservative
      s.ball_radius = std::sqrt(r2) * (1.0 + 1e-9) + 1e-12;
    }
  }

  const PartitionTree& tree() const noexcept { return *tree_; }
  const PointSet& points() const noexcept { return *points_; }
  const NodeSummary& summary(std::size_t v) const { return summaries_.at(v); }

 private:
  const PartitionTree* tree_;
  const PointSet* points_;
  std::vector<NodeSummary> summaries_;
};

struct QueryOptions {
  bool use_fast_path = true;
};

namespace detail {

// empty/full when the bounds settle it, nullopt otherwise
inline std::optional<StabResult> summary_test(const NodeSummary& s, const BallRange& q) {
  const double r2 = q.radius * q.radius;
  double near2 = 0.0, far2 = 0.0;
  for (std::size_t k = 0; k < s.lo.size(); ++k) {
    const double c = q.center[k];
    const double dn = c < s.lo[k] ? s.lo[k] - c : (c > s.hi[k] ? c - s.hi[k] : 0.0);
    const double df = std::max(std::abs(c - s.lo[k]), std::abs(c - s.hi[k]));
    near2 += dn * dn;
    far2 += df * df;
  }
  constexpr double kRel = 1e-12;
  if (near2 > r2 * (1.0 + kRel) + 1e-300) return StabResult::empty;
  if (far2 < r2 * (1.0 - kRel)) return StabResult::full;
  const double dc = distance(s.centroid, q.center);
  if (dc > (s.ball_radius + q.radius) * (1.0 + kRel)) return StabResult::empty;
  if ((dc + s.ball_radius) * (1.0 + kRel) < q.radius) return StabResult::full;
  return std::nullopt;
}

inline StabResult node_test(const PartitionIndex& index, std::size_t v, const BallRange& q, bool fast) {
  if (fast) {
    if (auto r = summary_test(index.summary(v), q)) return *r;
  }
  return stabs_unchecked(q, index.points(), index.tree().points(v));
}

inline void append_inside(const PartitionIndex& index, std::size_t v, const BallRange& q, std::vector<Index>& out) {
  for (Index i : index.tree().points(v))
    if (q.contains(index.points()[i])) out.push_back(i);
}

inline void check_query(const PartitionIndex& index, const BallRange& q) {
  require(q.dim() == index.points().dim(), "query: dimension mismatch");
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::int64_t ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace detail

/// Exact traversal: prune empty nodes, report full ones whole, recurse on stabbed.
inline QueryReport query_exact(const PartitionIndex& index, const BallRange& q, QueryOptions opts = {}) {
  detail::check_query(index, q);
  detail::Stopwatch clock;
  QueryReport rep;
  rep.mode = QueryMode::exact;
  rep.nodes_visited = 1;
  const auto& tree = index.tree();
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    const auto verdict = detail::node_test(index, v, q, opts.use_fast_path);
    if (verdict == StabResult::empty) continue;
    if (verdict == StabResult::full) {
      const auto ids = tree.points(v);
      rep.result.insert(rep.result.end(), ids.begin(), ids.end());
      continue;
    }
    const auto& nd = tree.node(v);
    if (nd.is_leaf()) {
      detail::append_inside(index, v, q, rep.result);
      continue;
    }
    rep.nodes_visited += 2;
    stack.push_back(static_cast<std::size_t>(nd.right));
    stack.push_back(static_cast<std::size_t>(nd.left));
  }
  rep.wall_time_ns = clock.ns();
  return rep;
}

/// Per-node three-way decision procedure. `classify` returns nullopt for nodes
/// without a model; the traversal then falls back to the exact test.
class NodeClassifier {
 public:
  virtual ~NodeClassifier() = default;
  virtual std::size_t num_nodes() const = 0;
  virtual std::optional<StabResult> classify(std::size_t node, const BallRange& q) const = 0;
};

/// Traversal with the node decision delegated to `clf` at internal nodes.
/// Leaves, and subtrees predicted full, are filtered exactly, so no reported
/// point lies outside q; a wrong `empty` prediction can only drop points.
inline QueryReport query_with_classifier(const PartitionIndex& index, const BallRange& q, const NodeClassifier& clf,
                                         QueryOptions opts = {}) {
  detail::check_query(index, q);
  const auto& tree = index.tree();
  detail::require(clf.num_nodes() == tree.num_nodes(), "query_with_classifier: classifier does not match the tree");
  detail::Stopwatch clock;
  QueryReport rep;
  rep.mode = QueryMode::classifier;
  rep.nodes_visited = 1;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    const auto& nd = tree.node(v);
    if (nd.is_leaf()) {
      detail::append_inside(index, v, q, rep.result);
      continue;
    }
    auto verdict = clf.classify(v, q);
    if (!verdict) verdict = detail::node_test(index, v, q, opts.use_fast_path);
    if (*verdict == StabResult::empty) continue;
    if (*verdict == StabResult::full) {
      detail::append_inside(index, v, q, rep.result);
      continue;
    }
    rep.nodes_visited += 2;
    stack.push_back(static_cast<std::size_t>(nd.right));
    stack.push_back(static_cast<std::size_t>(nd.left));
  }
  rep.wall_time_ns = clock.ns();
  return rep;
}

/// Answers every node test exactly; a test double and the ideal classifier.
class OracleClassifier : public NodeClassifier {
 public:
  explicit OracleClassifier(const PartitionIndex& index) : index_(&index) {}
  std::size_t num_nodes() const override { return index_->tree().num_nodes(); }
  std::optional<StabResult> classify(std::size_t node, const BallRange& q) const override {
    return detail::stabs_unchecked(q, index_->points(), index_->tree().points(node));
  }

 private:
  const PartitionIndex* index_;
};

/// Returns the same verdict everywhere.
class ConstantClassifier : public NodeClassifier {
 public:
  ConstantClassifier(std::size_t num_nodes, StabResult verdict) : n_(num_nodes), verdict_(verdict) {}
  std::size_t num_nodes() const override { return n_; }
  std::optional<StabResult> classify(std::size_t, const BallRange&) const override { return verdict_; }

 private:
  std::size_t n_;
  StabResult verdict_;
};

struct AccuracyReport {
  double recall = 1.0;
  double precision = 1.0;
  std::size_t found = 0;
  std::size_t truth = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> misses;  // per query
};

/// Compares classifier-mode result sets against exact-mode truth.
inline AccuracyReport accuracy_report(std::span<const std::vector<Index>> results,
                                      std::span<const std::vector<Index>> truth) {
  detail::require(results.size() == truth.size(), "accuracy_report: length mismatch");
  AccuracyReport rep;
  rep.misses.reserve(results.size());
  for (std::size_t k = 0; k < results.size(); ++k) {
    std::vector<Index> a = results[k], b = truth[k];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<Index> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    rep.found += a.size();
    rep.truth += b.size();
    rep.correct += common.size();
    rep.misses.push_back(b.size() - common.size());
  }
  if (rep.truth > 0) rep.recall = static_cast<double>(rep.correct) / static_cast<double>(rep.truth);
  if (rep.found > 0) rep.precision = static_cast<double>(rep.correct) / static_cast<double>(rep.found);
  return rep;
}

inline std::vector<Index> linear_scan(const PointSet& points, const BallRange& q) {
  detail::require(q.dim() == points.dim(), "linear_scan: dimension mismatch");
  std::vector<Index> out;
  for (Index i = 0; i < points.size(); ++i)
    if (q.contains(points[i])) out.push_back(i);
  return out;
}

}  // namespace qdrs
