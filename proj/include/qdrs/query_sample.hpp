#pragma once

#include <cstdint>
#include <vector>

#include "qdrs/geometry.hpp"

namespace qdrs {

/// i.i.d. draw of query ranges used to adapt a tree to the query distribution.
struct QuerySample {
  std::vector<BallRange> queries;
  std::uint64_t source_seed = 0;

  std::size_t size() const noexcept { return queries.size(); }
  bool empty() const noexcept { return queries.empty(); }

  void check_dim(std::size_t d) const {
    for (const auto& q : queries) detail::require(q.dim() == d, "QuerySample: query dimension mismatch");
  }

  /// Centers only; used by the fixed-radius ring-tree pipeline.
  PointSet centers() const {
    detail::require(!queries.empty(), "QuerySample: no queries");
    const std::size_t d = queries.front().dim();
    std::vector<double> flat;
    flat.reserve(queries.size() * d);
    for (const auto& q : queries) flat.insert(flat.end(), q.center.begin(), q.center.end());
    return PointSet(d, std::move(flat));
  }
};

}  // namespace qdrs
