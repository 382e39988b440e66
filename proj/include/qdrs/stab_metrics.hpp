#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdrs/geometry.hpp"

namespace qdrs {

/// Unordered vertex pair; stored with first < second once normalized.
struct Edge {
  Index a = 0;
  Index b = 0;

  Edge() = default;
  Edge(Index u, Index v) : a(std::min(u, v)), b(std::max(u, v)) {}

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct SpanningTree {
  std::size_t n = 0;
  std::vector<Edge> edges;

  /// Throws usage_error unless the edges form a spanning tree on 0..n-1.
  void validate() const {
    detail::require(n >= 1, "SpanningTree: empty vertex set");
    detail::require(edges.size() + 1 == n, "SpanningTree: need exactly n-1 edges");
    std::vector<Index> parent(n);
    std::iota(parent.begin(), parent.end(), Index{0});
    std::function<Index(Index)> find = [&](Index x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : edges) {
      detail::require(e.a < n && e.b < n && e.a != e.b, "SpanningTree: bad edge");
      const Index ra = find(e.a), rb = find(e.b);
      detail::require(ra != rb, "SpanningTree: cycle");
      parent[ra] = rb;
    }
  }
};

struct SpanningPath {
  std::vector<Index> order;

  std::size_t size() const noexcept { return order.size(); }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    if (order.size() < 2) return out;
    out.reserve(order.size() - 1);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) out.emplace_back(order[i], order[i + 1]);
    return out;
  }

  void validate() const {
    std::vector<bool> seen(order.size(), false);
    for (Index v : order) {
      detail::require(v < order.size() && !seen[v], "SpanningPath: order is not a permutation");
      seen[v] = true;
    }
  }

  friend bool operator==(const SpanningPath&, const SpanningPath&) = default;
};

/// Binary partition tree. Every node's subset is a contiguous slice of
/// `order()` (any binary partition tree admits such a layout by taking the
/// left-to-right leaf order), so P_v is stored as [begin, end).
class PartitionTree {
 public:
  static constexpr std::int32_t kNone = -1;

  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = kNone;
    std::int32_t right = kNone;

    bool is_leaf() const noexcept { return left == kNone; }
    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  PartitionTree() = default;

  /// Node 0 is the root and must span the whole order.
  PartitionTree(std::vector<Index> order, std::vector<Node> nodes)
      : order_(std::move(order)), nodes_(std::move(nodes)) {
    validate();
  }

  /// Builds a tree by recursively asking `split` for the size of the left
  /// part of a slice; `split` returns 0 to make the slice a leaf.
  template <class SplitFn>
  static PartitionTree build(std::vector<Index> order, SplitFn&& split) {
    detail::require(!order.empty(), "PartitionTree: empty point set");
    std::vector<Node> nodes;
    nodes.push_back({0, static_cast<std::uint32_t>(order.size()), kNone, kNone});
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      const Node cur = nodes[v];
      const std::size_t left_size = split(cur.begin, cur.end);
      if (left_size == 0) continue;
      detail::require(left_size < cur.size(), "PartitionTree::build: split must leave both sides non-empty");
      const auto mid = static_cast<std::uint32_t>(cur.begin + left_size);
      const auto l = static_cast<std::int32_t>(nodes.size());
      nodes.push_back({cur.begin, mid, kNone, kNone});
      nodes.push_back({mid, cur.end, kNone, kNone});
      nodes[v].left = l;
      nodes[v].right = l + 1;
      stack.push_back(l + 1);
      stack.push_back(l);
    }
    return PartitionTree(std::move(order), std::move(nodes));
  }

  std::size_t num_points() const noexcept { return order_.size(); }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t v) const { return nodes_.at(v); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Index>& order() const noexcept { return order_; }

  std::span<const Index> points(std::size_t v) const {
    const Node& nd = nodes_.at(v);
    return std::span<const Index>(order_).subspan(nd.begin, nd.size());
  }

  std::size_t max_leaf_size() const noexcept {
    std::size_t m = 0;
    for (const auto& nd : nodes_)
      if (nd.is_leaf()) m = std::max(m, nd.size());
    return m;
  }

  std::size_t height() const {
    std::size_t h = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [v, depth] = stack.back();
      stack.pop_back();
      h = std::max(h, depth);
      if (!nodes_[v].is_leaf()) {
        stack.emplace_back(nodes_[v].left, depth + 1);
        stack.emplace_back(nodes_[v].right, depth + 1);
      }
    }
    return h;
  }

  friend bool operator==(const PartitionTree&, const PartitionTree&) = default;

 private:
  void validate() const {
    detail::require(!nodes_.empty() && !order_.empty(), "PartitionTree: empty");
    SpanningPath{order_}.validate();
    detail::require(nodes_[0].begin == 0 && nodes_[0].end == order_.size(), "PartitionTree: root must hold all points");
    std::vector<bool> reached(nodes_.size(), false);
    std::vector<std::int32_t> stack{0};
    reached[0] = true;
    while (!stack.empty()) {
      const Node& nd = nodes_[stack.back()];
      stack.pop_back();
      detail::require(nd.begin < nd.end, "PartitionTree: empty node");
      if (nd.is_leaf()) {
        detail::require(nd.right == kNone, "PartitionTree: half-leaf node");
        continue;
      }
      detail::require(nd.left >= 0 && nd.right >= 0 && static_cast<std::size_t>(nd.left) < nodes_.size() &&
                          static_cast<std::size_t>(nd.right) < nodes_.size(),
                      "PartitionTree: child index out of range");
      const Node& l = nodes_[nd.left];
      const Node& r = nodes_[nd.right];
      detail::require(l.begin == nd.begin && l.end == r.begin && r.end == nd.end,
                      "PartitionTree: children do not partition their parent");
      detail::require(!reached[nd.left] && !reached[nd.right], "PartitionTree: node reached twice");
      reached[nd.left] = reached[nd.right] = true;
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
    for (bool r : reached) detail::require(r, "PartitionTree: unreachable node");
  }

  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// stabbing and visiting numbers

namespace detail {
inline void check_edges(std::span<const Edge> edges, const PointSet& points) {
  for (const auto& e : edges) require(e.a < points.size() && e.b < points.size(), "stab_count: edge index out of range");
}
}  // namespace detail

/// Number of edges with exactly one endpoint inside q.
template <RangePredicate R>
std::size_t stab_count(std::span<const Edge> edges, const R& q, const PointSet& points) {
  detail::check_edges(edges, points);
  std::size_t s = 0;
  for (const auto& e : edges) s += (q.contains(points[e.a]) != q.contains(points[e.b])) ? 1 : 0;
  return s;
}

template <RangePredicate R>
std::size_t stab_count(const SpanningTree& t, const R& q, const PointSet& points) {
  return stab_count(std::span<const Edge>(t.edges), q, points);
}

template <RangePredicate R>
std::size_t stab_count(const SpanningPath& p, const R& q, const PointSet& points) {
  const auto e = p.edges();
  return stab_count(std::span<const Edge>(e), q, points);
}

/// Root plus every node whose parent's subset is stabbed by q.
template <RangePredicate R>
std::size_t visiting_number(const PartitionTree& tree, const R& q, const PointSet& points) {
  detail::require(tree.num_points() == points.size(), "visiting_number: tree/point set size mismatch");
  std::size_t zeta = 1;
  for (std::size_t v = 0; v < tree.num_nodes(); ++v) {
    const auto& nd = tree.node(v);
    if (nd.is_leaf()) continue;
    if (detail::stabs_unchecked(q, points, tree.points(v)) == StabResult::stabbed) zeta += 2;
  }
  return zeta;
}

// ---------------------------------------------------------------------------
// the three transforms

/// Depth-first preorder of `tree` from vertex 0, children in ascending index order.
inline SpanningPath tree_to_path(const SpanningTree& tree) {
  tree.validate();
  std::vector<std::vector<Index>> adj(tree.n);
  for (const auto& e : tree.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  SpanningPath path;
  path.order.reserve(tree.n);
  std::vector<bool> seen(tree.n, false);
  std::vector<Index> stack{0};
  while (!stack.empty()) {
    const Index v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = true;
    path.order.push_back(v);
    for (auto it = adj[v].rbegin(); it != adj[v].rend(); ++it)
      if (!seen[*it]) stack.push_back(*it);
  }
  return path;
}

/// Height-balanced binary tree whose left-to-right leaves follow the path.
inline PartitionTree path_to_partition_tree(const SpanningPath& path, std::size_t leaf_capacity = 1) {
  detail::require(leaf_capacity >= 1, "path_to_partition_tree: leaf_capacity must be >= 1");
  detail::require(!path.order.empty(), "path_to_partition_tree: empty path");
  path.validate();
  return PartitionTree::build(path.order, [leaf_capacity](std::size_t b, std::size_t e) -> std::size_t {
    const std::size_t size = e - b;
    if (size <= leaf_capacity) return 0;
    const std::size_t leaves = (size + leaf_capacity - 1) / leaf_capacity;
    return std::min(size - 1, ((leaves + 1) / 2) * leaf_capacity);
  });
}

/// Leaf order of a tree with singleton leaves.
inline SpanningPath partition_tree_to_path(const PartitionTree& tree) {
  detail::require(tree.max_leaf_size() == 1, "partition_tree_to_path: leaves must be singletons");
  return SpanningPath{tree.order()};
}

/// ceil(log2 n) for n >= 1.
inline std::size_t ceil_log2(std::size_t n) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

}  // namespace qdrs
