#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdrs/errors.hpp"

namespace qdrs {

using Index = std::size_t;
using PointView = std::span<const double>;

/// A finite set of points in R^d, stored row-major. Points are referred to
/// by their 0-based position; subsets downstream are index sets.
class PointSet {
 public:
  PointSet() = default;

  PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    detail::require(dim_ > 0, "PointSet: dimension must be positive");
    detail::require(coords_.size() % dim_ == 0, "PointSet: coordinate count is not a multiple of dim");
    for (double c : coords_) detail::require(std::isfinite(c), "PointSet: non-finite coordinate");
  }

  static PointSet from_rows(const std::vector<std::vector<double>>& rows) {
    detail::require(!rows.empty(), "PointSet: no rows");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (const auto& r : rows) {
      detail::require(r.size() == d, "PointSet: ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return PointSet(d, std::move(flat));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return size() == 0; }

  PointView operator[](Index i) const noexcept { return {coords_.data() + i * dim_, dim_}; }
  PointView at(Index i) const {
    if (i >= size()) throw usage_error("PointSet: index " + std::to_string(i) + " out of range");
    return (*this)[i];
  }

  const std::vector<double>& coords() const noexcept { return coords_; }

  PointSet subset(std::span<const Index> ids) const {
    std::vector<double> flat;
    flat.reserve(ids.size() * dim_);
    for (Index i : ids) {
      auto p = at(i);
      flat.insert(flat.end(), p.begin(), p.end());
    }
    return PointSet(dim_, std::move(flat));
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

inline double squared_distance(PointView a, PointView b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline double distance(PointView a, PointView b) noexcept { return std::sqrt(squared_distance(a, b)); }

/// Membership test point -> {in, out}. Must be pure.
template <class R>
concept RangePredicate = requires(const R& r, PointView x) {
  { r.contains(x) } -> std::convertible_to<bool>;
};

/// Closed Euclidean ball.
struct BallRange {
  std::vector<double> center;
  double radius = 0.0;

  BallRange() = default;
  BallRange(std::vector<double> c, double r) : center(std::move(c)), radius(r) {
    detail::require(std::isfinite(radius) && radius >= 0.0, "BallRange: radius must be finite and >= 0");
    detail::require(!center.empty(), "BallRange: empty center");
  }

  std::size_t dim() const noexcept { return center.size(); }

  bool contains(PointView x) const noexcept {
    return squared_distance(center, x) <= radius * radius;
  }

  friend bool operator==(const BallRange&, const BallRange&) = default;
};

/// Closed ring r1 <= |x - center| <= r2.
struct Ring {
  std::vector<double> center;
  double inner_radius = 0.0;
  double outer_radius = 0.0;

  Ring() = default;
  Ring(std::vector<double> c, double r1, double r2) : center(std::move(c)), inner_radius(r1), outer_radius(r2) {
    detail::require(r1 >= 0.0 && r1 <= r2, "Ring: need 0 <= r1 <= r2");
  }

  bool contains(PointView x) const noexcept {
    const double d2 = squared_distance(center, x);
    return inner_radius * inner_radius <= d2 && d2 <= outer_radius * outer_radius;
  }
};

enum class StabResult { empty, stabbed, full };

inline const char* to_string(StabResult s) noexcept {
  switch (s) {
    case StabResult::empty: return "empty";
    case StabResult::stabbed: return "stabbed";
    case StabResult::full: return "full";
  }
  return "?";
}

inline bool ball_contains(const BallRange& q, PointView x) {
  detail::require(q.dim() == x.size(), "ball_contains: dimension mismatch");
  return q.contains(x);
}

inline bool ring_contains(const Ring& ring, PointView x) {
  detail::require(ring.center.size() == x.size(), "ring_contains: dimension mismatch");
  return ring.contains(x);
}

namespace detail {
template <RangePredicate R>
StabResult stabs_unchecked(const R& q, const PointSet& points, std::span<const Index> subset) {
  bool any_in = false;
  bool any_out = false;
  for (Index i : subset) {
    if (q.contains(points[i])) any_in = true;
    else any_out = true;
    if (any_in && any_out) return StabResult::stabbed;
  }
  return any_in ? StabResult::full : StabResult::empty;
}
}  // namespace detail

/// Three-way classification of a subset against a range.
template <RangePredicate R>
StabResult stabs(const R& q, const PointSet& points, std::span<const Index> subset) {
  detail::require(!subset.empty(), "stabs: empty subset");
  for (Index i : subset) detail::require(i < points.size(), "stabs: index out of range");
  if constexpr (requires { q.dim(); }) detail::require(q.dim() == points.dim(), "stabs: dimension mismatch");
  return detail::stabs_unchecked(q, points, subset);
}

}  // namespace qdrs
