#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/stab_metrics.hpp"

namespace qdrs::tu {

inline PointSet random_points(std::size_t n, std::size_t d, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> c(n * d);
  for (double& x : c) x = u(rng);
  return PointSet(d, std::move(c));
}

inline BallRange random_ball(std::size_t d, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0,
                             double rmax = 0.6) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_real_distribution<double> ur(0.0, rmax);
  std::vector<double> c(d);
  for (double& x : c) x = u(rng);
  return BallRange(std::move(c), ur(rng));
}

// Random labeled tree: each vertex v > 0 attaches to a uniform earlier vertex
// of a random relabeling.
inline SpanningTree random_spanning_tree(std::size_t n, std::mt19937_64& rng) {
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  SpanningTree t;
  t.n = n;
  for (std::size_t k = 1; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    t.edges.emplace_back(perm[k], perm[pick(rng)]);
  }
  return t;
}

inline SpanningPath random_path(std::size_t n, std::mt19937_64& rng) {
  SpanningPath p;
  p.order.resize(n);
  std::iota(p.order.begin(), p.order.end(), Index{0});
  std::shuffle(p.order.begin(), p.order.end(), rng);
  return p;
}

// Arbitrary (unbalanced) binary partition tree with singleton leaves.
inline PartitionTree random_partition_tree(std::size_t n, std::mt19937_64& rng, std::size_t leaf_capacity = 1) {
  auto order = random_path(n, rng).order;
  return PartitionTree::build(std::move(order), [&](std::size_t b, std::size_t e) -> std::size_t {
    if (e - b <= leaf_capacity) return 0;
    std::uniform_int_distribution<std::size_t> cut(1, e - b - 1);
    return cut(rng);
  });
}

inline std::vector<Index> sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace qdrs::tu
