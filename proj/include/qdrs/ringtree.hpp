#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/stab_metrics.hpp"
#include "qdrs/tree_select.hpp"

namespace qdrs {

/// Sphere pair around `center`: points closer than r_s + r go inner, the
/// rest outer; queries within [r_s, r_s + 2r] must search both sides.
struct RingSeparator {
  std::vector<double> center;
  double inner_radius = 0.0;   // r_s
  double search_radius = 0.0;  // r

  RingSeparator() = default;
  RingSeparator(std::vector<double> p, double rs, double r)
      : center(std::move(p)), inner_radius(rs), search_radius(r) {
    detail::require(!center.empty(), "RingSeparator: empty center");
    for (double c : center) detail::require(std::isfinite(c), "RingSeparator: non-finite center");
    detail::require(std::isfinite(rs) && rs > 0.0, "RingSeparator: r_s must be finite and > 0");
    detail::require(std::isfinite(r) && r > 0.0, "RingSeparator: r must be finite and > 0");
  }

  double split_radius() const noexcept { return inner_radius + search_radius; }
  double outer_radius() const noexcept { return inner_radius + 2.0 * search_radius; }

  bool is_inner(PointView x) const noexcept { return squared_distance(center, x) < split_radius() * split_radius(); }
  Ring stab_ring() const { return Ring(center, inner_radius, outer_radius()); }
  Ring half_ring() const { return Ring(center, inner_radius, split_radius()); }

  friend bool operator==(const RingSeparator&, const RingSeparator&) = default;
};

enum class Route { inner, outer, both };

inline Route route(const RingSeparator& s, PointView q) noexcept {
  // both-branch widened by a relative 1e-12 against rounding
  constexpr double kSlack = 1e-12;
  const double d = distance(s.center, q);
  if (d < s.inner_radius * (1.0 - kSlack)) return Route::inner;
  if (d > s.outer_radius() * (1.0 + kSlack)) return Route::outer;
  return Route::both;
}

/// Binary tree over index subsets of P: internal nodes carry a separator
/// with inner = left child and outer = right child.
class RingTree {
 public:
  RingTree() = default;
  RingTree(PartitionTree layout, std::vector<std::optional<RingSeparator>> separators, double r,
           std::size_t leaf_capacity)
      : layout_(std::move(layout)), separators_(std::move(separators)), r_(r), leaf_capacity_(leaf_capacity) {
    detail::require(std::isfinite(r_) && r_ > 0.0, "RingTree: search radius must be > 0");
    detail::require(leaf_capacity_ >= 1, "RingTree: leaf_capacity must be >= 1");
    detail::require(separators_.size() == layout_.num_nodes(), "RingTree: one separator slot per node");
    for (std::size_t v = 0; v < layout_.num_nodes(); ++v) {
      const bool leaf = layout_.node(v).is_leaf();
      detail::require(leaf != separators_[v].has_value(), "RingTree: internal nodes need a separator, leaves none");
      if (!leaf) detail::require(separators_[v]->search_radius == r_, "RingTree: separator radius differs from tree");
    }
  }

  const PartitionTree& layout() const noexcept { return layout_; }
  std::size_t num_nodes() const noexcept { return layout_.num_nodes(); }
  std::size_t num_points() const noexcept { return layout_.num_points(); }
  double search_radius() const noexcept { return r_; }
  std::size_t leaf_capacity() const noexcept { return leaf_capacity_; }
  const std::optional<RingSeparator>& separator(std::size_t v) const { return separators_.at(v); }
  std::size_t height() const { return layout_.height(); }

  /// Recomputes every internal node's inner/outer split from its separator
  /// and compares it with the stored children.
  bool consistent_with(const PointSet& points) const {
    if (points.size() != num_points()) return false;
    for (std::size_t v = 0; v < num_nodes(); ++v) {
      const auto& nd = layout_.node(v);
      if (nd.is_leaf()) continue;
      const auto& sep = *separators_[v];
      for (Index i : layout_.points(static_cast<std::size_t>(nd.left)))
        if (!sep.is_inner(points[i])) return false;
      for (Index i : layout_.points(static_cast<std::size_t>(nd.right)))
        if (sep.is_inner(points[i])) return false;
    }
    return true;
  }

  friend bool operator==(const RingTree&, const RingTree&) = default;

 private:
  PartitionTree layout_;
  std::vector<std::optional<RingSeparator>> separators_;
  double r_ = 1.0;
  std::size_t leaf_capacity_ = 16;
};

// ---------------------------------------------------------------------------
// separator search

enum class SeparatorMode { exact_small, local_search, grid_oracle };

inline const char* to_string(SeparatorMode m) noexcept {
  switch (m) {
    case SeparatorMode::exact_small: return "exact_small";
    case SeparatorMode::local_search: return "local_search";
    case SeparatorMode::grid_oracle: return "grid_oracle";
  }
  return "?";
}

inline SeparatorMode parse_separator_mode(const std::string& s) {
  if (s == "exact_small") return SeparatorMode::exact_small;
  if (s == "local_search") return SeparatorMode::local_search;
  if (s == "grid_oracle") return SeparatorMode::grid_oracle;
  throw usage_error("unknown separator mode '" + s + "' (expected exact_small, local_search or grid_oracle)");
}

enum class QueryFilter { distance, routing };

inline const char* to_string(QueryFilter f) noexcept { return f == QueryFilter::distance ? "distance" : "routing"; }

inline QueryFilter parse_query_filter(const std::string& s) {
  if (s == "distance") return QueryFilter::distance;
  if (s == "routing") return QueryFilter::routing;
  throw usage_error("unknown query filter '" + s + "' (expected distance or routing)");
}

struct SeparatorSearchConfig {
  SeparatorMode mode = SeparatorMode::local_search;
  double beta = 0.25;
  std::size_t restarts = 4;
  std::size_t pool_size = 16;
  std::size_t max_iterations = 200;
  std::size_t max_start_attempts = 100;
  std::size_t leaf_capacity = 16;
  std::size_t point_sample = 0;           // per-node point subsample for the search; 0 = query-sample size
  std::size_t exact_max_elements = 90;    // per-node cap on |P u S| handed to exact_small during builds
  double grid_pitch = 0.01;               // fraction of the instance diameter
  double grid_margin = 1.0;               // grid extends this many diameters past the bounding box
  double epsilon = 1e-6;                  // perturbation, fraction of the instance diameter
  bool polish = true;                     // local search: re-optimize r_s at each climbed center by radial sweep
  QueryFilter filter = QueryFilter::distance;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(beta > 0.0 && beta <= 0.5, "SeparatorSearchConfig: beta must be in (0, 1/2]");
    detail::require(restarts >= 1 && pool_size >= 1 && max_iterations >= 1 && max_start_attempts >= 1,
                    "SeparatorSearchConfig: restarts, pool_size and iteration caps must be >= 1");
    detail::require(leaf_capacity >= 1, "SeparatorSearchConfig: leaf_capacity must be >= 1");
    detail::require(exact_max_elements >= 4, "SeparatorSearchConfig: exact_max_elements too small");
    detail::require(grid_pitch > 0.0 && grid_pitch <= 1.0 && grid_margin >= 0.0 && epsilon > 0.0,
                    "SeparatorSearchConfig: bad grid or epsilon settings");
  }
};

/// Counts for a candidate on a problem instance.
struct SeparatorScore {
  std::size_t mass = 0;    // sample centers in [r_s, r_s + 2r]
  std::size_t mass_r = 0;  // sample centers in [r_s, r_s + r]
  std::size_t inner = 0;
  std::size_t outer = 0;

  std::size_t min_side() const noexcept { return std::min(inner, outer); }
  bool balanced(double beta) const noexcept {
    const double n = static_cast<double>(inner + outer);
    return inner > 0 && outer > 0 && static_cast<double>(min_side()) >= beta * n;
  }
};

struct SeparatorResult {
  RingSeparator separator;
  SeparatorScore score;
  std::size_t candidates = 0;   // candidates evaluated
  std::size_t start_mass = 0;   // local search: mass of the winning restart's start
  std::size_t restarts_ok = 0;  // local search: restarts that found a balanced start
};

namespace detail {

inline SeparatorScore score_separator(const PointSet& points, const PointSet& queries, PointView center, double rs,
                                      double r) {
  SeparatorScore s;
  const double lo2 = rs * rs, split2 = (rs + r) * (rs + r), hi2 = (rs + 2.0 * r) * (rs + 2.0 * r);
  for (Index i = 0; i < points.size(); ++i) (squared_distance(center, points[i]) < split2 ? s.inner : s.outer) += 1;
  for (Index j = 0; j < queries.size(); ++j) {
    const double d2 = squared_distance(center, queries[j]);
    if (d2 >= lo2 && d2 <= hi2) {
      ++s.mass;
      if (d2 <= split2) ++s.mass_r;
    }
  }
  return s;
}

// lower mass first, then the more even split
inline bool better(const SeparatorScore& a, const SeparatorScore& b) noexcept {
  return a.mass < b.mass || (a.mass == b.mass && a.min_side() > b.min_side());
}

/// Tracks the best balanced candidate; cheap rejection before full scoring.
class BestSeparator {
 public:
  BestSeparator(const PointSet& points, const PointSet& queries, double r, double beta)
      : points_(points), queries_(queries), r_(r), beta_(beta) {}

  void consider(PointView center, double rs) {
    if (!valid(center, rs)) return;
    ++candidates_;
    const double lo2 = rs * rs, split2 = (rs + r_) * (rs + r_), hi2 = (rs + 2.0 * r_) * (rs + 2.0 * r_);
    std::size_t inner = 0;
    for (Index i = 0; i < points_.size(); ++i) inner += squared_distance(center, points_[i]) < split2 ? 1 : 0;
    SeparatorScore s;
    s.inner = inner;
    s.outer = points_.size() - inner;
    if (!s.balanced(beta_)) return;
    const std::size_t limit = best_ ? best_->score.mass : std::numeric_limits<std::size_t>::max();
    for (Index j = 0; j < queries_.size(); ++j) {
      const double d2 = squared_distance(center, queries_[j]);
      if (d2 >= lo2 && d2 <= hi2) {
        if (++s.mass > limit) return;
        if (d2 <= split2) ++s.mass_r;
      }
    }
    if (best_ && !better(s, best_->score)) return;
    best_ = SeparatorResult{RingSeparator(std::vector<double>(center.begin(), center.end()), rs, r_), s, 0, 0, 0};
  }

  /// Candidate whose mass and inner count are already known (up to rounding);
  /// rescored exactly only when it would win.
  void offer(PointView center, double rs, std::size_t mass, std::size_t inner) {
    if (!valid(center, rs)) return;
    ++candidates_;
    SeparatorScore s;
    s.mass = mass;
    s.inner = inner;
    s.outer = points_.size() - inner;
    if (!s.balanced(beta_) || (best_ && !better(s, best_->score))) return;
    s = score_separator(points_, queries_, center, rs, r_);
    if (!s.balanced(beta_) || (best_ && !better(s, best_->score))) return;
    best_ = SeparatorResult{RingSeparator(std::vector<double>(center.begin(), center.end()), rs, r_), s, 0, 0, 0};
  }

  std::optional<SeparatorResult> result() const {
    if (!best_) return std::nullopt;
    auto out = *best_;
    out.candidates = candidates_;
    return out;
  }

  std::size_t candidates() const noexcept { return candidates_; }
  double beta() const noexcept { return beta_; }

 private:
  static bool valid(PointView center, double rs) {
    if (!(rs > 0.0) || !std::isfinite(rs)) return false;
    for (double c : center)
      if (!std::isfinite(c)) return false;
    return true;
  }

  const PointSet& points_;
  const PointSet& queries_;
  double r_;
  double beta_;
  std::size_t candidates_ = 0;
  std::optional<SeparatorResult> best_;
};

/// Exact minimization over r_s for a fixed center: mass and the inner count
/// are constant between consecutive breakpoints, so the best open interval
/// is found by counting and its midpoint offered.
inline void radial_sweep(const PointSet& points, const PointSet& queries, PointView center, double r,
                         BestSeparator& best, std::vector<std::pair<double, int>>& events) {
  events.clear();
  for (Index j = 0; j < queries.size(); ++j) {
    const double d = distance(center, queries[j]);
    events.emplace_back(d - 2.0 * r, 1);
    events.emplace_back(d, -1);
  }
  for (Index i = 0; i < points.size(); ++i) events.emplace_back(distance(center, points[i]) - r, 0);
  std::sort(events.begin(), events.end());
  std::ptrdiff_t mass = 0;
  std::size_t inner = 0, k = 0;
  auto apply = [&](int e) {
    if (e == 0) ++inner;
    else mass += e;
  };
  while (k < events.size() && events[k].first <= 0.0) apply(events[k++].second);
  const std::size_t n = points.size();
  std::optional<SeparatorScore> top;
  double top_rs = 0.0, lower = 0.0;
  while (k < events.size()) {
    const double next = events[k].first;
    if (next > lower) {
      const SeparatorScore s{static_cast<std::size_t>(mass), 0, inner, n - inner};
      if (s.balanced(best.beta()) && (!top || better(s, *top))) {
        top = s;
        top_rs = 0.5 * (lower + next);
      }
    }
    while (k < events.size() && events[k].first == next) apply(events[k++].second);
    lower = next;
  }
  if (top) best.offer(center, top_rs, top->mass, top->inner);
}

// Gaussian elimination with partial pivoting; false when (nearly) singular.
inline bool solve_linear(std::size_t n, std::vector<double>& a, std::vector<double>& b) {
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (!(scale > 0.0)) return false;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (std::abs(a[piv * n + c]) <= 1e-12 * scale) return false;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c * n + k] * b[k];
    b[c] = s / a[c * n + c];
  }
  for (double x : b)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double diameter(const PointSet& a, const PointSet& b) {
  std::vector<PointView> all;
  for (Index i = 0; i < a.size(); ++i) all.push_back(a[i]);
  for (Index i = 0; i < b.size(); ++i) all.push_back(b[i]);
  double d2 = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) d2 = std::max(d2, squared_distance(all[i], all[j]));
  return std::sqrt(d2);
}

inline void check_problem(const PointSet& points, const PointSet& queries, double r) {
  require(points.size() >= 2, "separator search: need at least two points");
  require(queries.empty() || queries.dim() == points.dim(), "separator search: query dimension mismatch");
  require(std::isfinite(r) && r > 0.0, "separator search: r must be > 0");
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ull + b + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Sphere through d+1 points in R^d.
inline std::optional<std::pair<std::vector<double>, double>> circumsphere(std::span<const PointView> pts) {
  const std::size_t d = pts.front().size();
  std::vector<double> a(d * d), b(d);
  for (std::size_t i = 1; i <= d; ++i) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double v = pts[i][k] - pts[0][k];
      a[(i - 1) * d + k] = 2.0 * v;
      n2 += v * v;
    }
    b[i - 1] = n2;
  }
  if (!solve_linear(d, a, b)) return std::nullopt;
  std::vector<double> c(d);
  double r2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    c[k] = pts[0][k] + b[k];
    r2 += b[k] * b[k];
  }
  const double rad = std::sqrt(r2);
  if (!(rad > 0.0) || !std::isfinite(rad)) return std::nullopt;
  return std::make_pair(std::move(c), rad);
}

}  // namespace detail

/// Desk-scale exact search (d <= 2, |P u S| <= 400). Candidates: every
/// arrangement vertex where d+1 of the surfaces |x - u| = r_s + o meet
/// (o = r for points, o in {0, 2r} for sample centers), each perturbed into
/// all adjacent open cells and radially by +-eps; plus exact radial sweeps
/// at every element and every pairwise midpoint. Returns nullopt when no
/// candidate is beta-balanced.
inline std::optional<SeparatorResult> find_separator_exact_small(const PointSet& points, const PointSet& queries,
                                                                 double r, const SeparatorSearchConfig& cfg) {
  cfg.validate();
  detail::check_problem(points, queries, r);
  const std::size_t d = points.dim();
  detail::require(d <= 2, "find_separator_exact_small: dimension must be <= 2");
  detail::require(points.size() + queries.size() <= 400, "find_separator_exact_small: |P u S| must be <= 400");

  struct Element {
    PointView x;
    bool is_query;
  };
  std::vector<Element> elems;
  for (Index i = 0; i < points.size(); ++i) elems.push_back({points[i], false});
  for (Index j = 0; j < queries.size(); ++j) elems.push_back({queries[j], true});
  const std::size_t n_el = elems.size();
  const double eps = cfg.epsilon * std::max(detail::diameter(points, queries), 1e-300);

  detail::BestSeparator best(points, queries, r, cfg.beta);
  std::vector<std::pair<double, int>> events;
  std::vector<double> mid(d);
  for (std::size_t i = 0; i < n_el; ++i) {
    detail::radial_sweep(points, queries, elems[i].x, r, best, events);
    for (std::size_t j = i + 1; j < n_el; ++j) {
      for (std::size_t k = 0; k < d; ++k) mid[k] = 0.5 * (elems[i].x[k] + elems[j].x[k]);
      detail::radial_sweep(points, queries, mid, r, best, events);
    }
  }

  const std::size_t m = d + 1;
  std::vector<std::size_t> pick(m);
  std::vector<double> offs(m), a(d * d), bu(d), bw(d), p(d), cand(d), g(m * m), s(m), grad(m * m);
  const std::size_t patterns = std::size_t{1} << m;

  auto handle_vertex = [&](double rs) {
    if (!(rs > 0.0) || !std::isfinite(rs)) return;
    for (std::size_t k = 0; k < d; ++k) p[k] = elems[pick[0]].x[k] + bu[k] + bw[k] * rs;
    best.consider(p, rs + eps);
    best.consider(p, rs - eps);
    // gradients of |x - u_i| - r_s - o_i at the vertex
    for (std::size_t i = 0; i < m; ++i) {
      const double dist = distance(p, elems[pick[i]].x);
      if (!(dist > 0.0)) return;
      for (std::size_t k = 0; k < d; ++k) grad[i * m + k] = (p[k] - elems[pick[i]].x[k]) / dist;
      grad[i * m + d] = -1.0;
    }
    for (std::size_t pat = 0; pat < patterns; ++pat) {
      g = grad;
      for (std::size_t i = 0; i < m; ++i) s[i] = (pat >> i) & 1 ? 1.0 : -1.0;
      if (!detail::solve_linear(m, g, s)) continue;
      double norm = 0.0;
      for (double v : s) norm += v * v;
      norm = std::sqrt(norm);
      if (!(norm > 0.0)) continue;
      for (std::size_t k = 0; k < d; ++k) cand[k] = p[k] + eps * s[k] / norm;
      best.consider(cand, rs + eps * s[d] / norm);
    }
  };

  auto solve_subset = [&]() {
    const PointView u0 = elems[pick[0]].x;
    for (std::size_t i = 1; i < m; ++i) {
      const PointView ui = elems[pick[i]].x;
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = ui[k] - u0[k];
        a[(i - 1) * d + k] = 2.0 * v;
        n2 += v * v;
      }
      bu[i - 1] = n2 - (offs[i] * offs[i] - offs[0] * offs[0]);
      bw[i - 1] = -2.0 * (offs[i] - offs[0]);
    }
    std::vector<double> a2 = a;
    if (!detail::solve_linear(d, a, bu)) return;
    if (!detail::solve_linear(d, a2, bw)) return;
    // |bu + bw rs|^2 = (rs + o_0)^2
    double ww = 0.0, uw = 0.0, uu = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      ww += bw[k] * bw[k];
      uw += bu[k] * bw[k];
      uu += bu[k] * bu[k];
    }
    const double qa = ww - 1.0, qb = 2.0 * (uw - offs[0]), qc = uu - offs[0] * offs[0];
    if (std::abs(qa) < 1e-12) {
      if (qb != 0.0) handle_vertex(-qc / qb);
      return;
    }
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return;
    const double sq = std::sqrt(disc);
    const double t = -0.5 * (qb + std::copysign(sq, qb));
    if (t != 0.0) {
      handle_vertex(t / qa);
      handle_vertex(qc / t);
    } else {
      handle_vertex(0.0);
    }
  };

  // offset choices: points sit on r_s + r, sample centers on r_s or r_s + 2r
  std::function<void(std::size_t)> assign = [&](std::size_t i) {
    if (i == m) {
      solve_subset();
      return;
    }
    if (elems[pick[i]].is_query) {
      offs[i] = 0.0;
      assign(i + 1);
      offs[i] = 2.0 * r;
      assign(i + 1);
    } else {
      offs[i] = r;
      assign(i + 1);
    }
  };
  std::function<void(std::size_t, std::size_t)> choose = [&](std::size_t depth, std::size_t from) {
    if (depth == m) {
      assign(0);
      return;
    }
    for (std::size_t i = from; i + (m - depth) <= n_el; ++i) {
      pick[depth] = i;
      choose(depth + 1, i + 1);
    }
  };
  if (n_el >= m) choose(0, 0);
  return best.result();
}

/// Dense reference search for d <= 2: exact radial sweeps at every center of
/// a square grid with pitch grid_pitch * diameter covering the bounding box
/// of P u S widened by grid_margin * diameter.
inline std::optional<SeparatorResult> find_separator_grid(const PointSet& points, const PointSet& queries, double r,
                                                          const SeparatorSearchConfig& cfg) {
  cfg.validate();
  detail::check_problem(points, queries, r);
  const std::size_t d = points.dim();
  detail::require(d <= 2, "find_separator_grid: dimension must be <= 2");
  const double diam = detail::diameter(points, queries);
  detail::BestSeparator best(points, queries, r, cfg.beta);
  if (!(diam > 0.0)) return std::nullopt;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  auto grow = [&](const PointSet& s) {
    for (Index i = 0; i < s.size(); ++i)
      for (std::size_t k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], s[i][k]);
        hi[k] = std::max(hi[k], s[i][k]);
      }
  };
  grow(points);
  grow(queries);
  const double pitch = cfg.grid_pitch * diam;
  std::vector<std::size_t> steps(d);
  for (std::size_t k = 0; k < d; ++k) {
    lo[k] -= cfg.grid_margin * diam;
    hi[k] += cfg.grid_margin * diam;
    steps[k] = static_cast<std::size_t>(std::floor((hi[k] - lo[k]) / pitch)) + 1;
  }
  std::vector<std::pair<double, int>> events;
  std::vector<double> c(d);
  const std::size_t ny = d == 2 ? steps[1] : 1;
  for (std::size_t ix = 0; ix < steps[0]; ++ix) {
    c[0] = lo[0] + static_cast<double>(ix) * pitch;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      if (d == 2) c[1] = lo[1] + static_cast<double>(iy) * pitch;
      detail::radial_sweep(points, queries, c, r, best, events);
    }
  }
  return best.result();
}

/// Restarted hill climbing over (d+1)-point defining sets drawn from P u S.
/// A defining set yields the separator (circumcenter, r_s = circumradius);
/// neighbors swap one defining point for a member of a freshly sampled pool.
inline std::optional<SeparatorResult> find_separator_local(const PointSet& points, const PointSet& queries, double r,
                                                           const SeparatorSearchConfig& cfg) {
  cfg.validate();
  detail::check_problem(points, queries, r);
  const std::size_t d = points.dim();
  detail::require(points.size() >= d + 1, "find_separator_local: need at least d+1 points");
  std::vector<PointView> elems;
  for (Index i = 0; i < points.size(); ++i) elems.push_back(points[i]);
  for (Index j = 0; j < queries.size(); ++j) elems.push_back(queries[j]);
  const std::size_t n_el = elems.size();
  const std::size_t m = d + 1;

  struct State {
    std::vector<std::size_t> ids;
    RingSeparator sep;
    SeparatorScore score;
  };
  std::size_t candidates = 0;
  std::vector<PointView> buf(m);
  // nullopt when degenerate, unbalanced, or mass reaches `limit`
  auto evaluate = [&](const std::vector<std::size_t>& ids, std::size_t limit) -> std::optional<State> {
    for (std::size_t i = 0; i < m; ++i) buf[i] = elems[ids[i]];
    auto sphere = detail::circumsphere(buf);
    if (!sphere) return std::nullopt;
    ++candidates;
    const double rs = sphere->second;
    const double lo2 = rs * rs, split2 = (rs + r) * (rs + r), hi2 = (rs + 2.0 * r) * (rs + 2.0 * r);
    const auto max_side = static_cast<std::size_t>((1.0 - cfg.beta) * static_cast<double>(points.size()));
    SeparatorScore s;
    for (Index i = 0; i < points.size(); ++i) {
      if (squared_distance(sphere->first, points[i]) < split2) ++s.inner;
      else ++s.outer;
      if (s.inner > max_side || s.outer > max_side) return std::nullopt;
    }
    if (!s.balanced(cfg.beta)) return std::nullopt;
    for (Index j = 0; j < queries.size(); ++j) {
      const double d2 = squared_distance(sphere->first, queries[j]);
      if (d2 >= lo2 && d2 <= hi2) {
        if (++s.mass >= limit) return std::nullopt;
        if (d2 <= split2) ++s.mass_r;
      }
    }
    return State{ids, RingSeparator(std::move(sphere->first), rs, r), s};
  };
  constexpr std::size_t kNoLimit = std::numeric_limits<std::size_t>::max();

  std::optional<State> best;
  std::size_t best_start = 0, restarts_ok = 0;
  std::uniform_int_distribution<std::size_t> any(0, n_el - 1);
  for (std::size_t rs = 0; rs < cfg.restarts; ++rs) {
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, rs));
    std::optional<State> cur;
    for (std::size_t attempt = 0; attempt < cfg.max_start_attempts && !cur; ++attempt) {
      std::vector<std::size_t> ids(n_el);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      std::vector<std::size_t> start;
      std::sample(ids.begin(), ids.end(), std::back_inserter(start), m, rng);
      std::shuffle(start.begin(), start.end(), rng);
      cur = evaluate(start, kNoLimit);
    }
    if (!cur) continue;
    ++restarts_ok;
    const std::size_t start_mass = cur->score.mass;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
      std::vector<std::size_t> pool(cfg.pool_size);
      for (auto& x : pool) x = any(rng);
      std::optional<State> step;
      for (std::size_t slot = 0; slot < m; ++slot) {
        for (std::size_t c : pool) {
          if (std::find(cur->ids.begin(), cur->ids.end(), c) != cur->ids.end()) continue;
          auto ids = cur->ids;
          ids[slot] = c;
          auto nb = evaluate(ids, step ? step->score.mass + 1 : cur->score.mass);
          if (!nb) continue;
          if (!step || detail::better(nb->score, step->score)) step = std::move(nb);
        }
      }
      if (!step) break;
      cur = std::move(step);
    }
    if (cfg.polish) {
      detail::BestSeparator pol(points, queries, r, cfg.beta);
      std::vector<std::pair<double, int>> events;
      detail::radial_sweep(points, queries, cur->sep.center, r, pol, events);
      candidates += pol.candidates();
      if (auto p = pol.result(); p && detail::better(p->score, cur->score)) {
        cur->sep = p->separator;
        cur->score = p->score;
      }
    }
    if (!best || detail::better(cur->score, best->score)) {
      best = std::move(cur);
      best_start = start_mass;
    }
  }
  if (!best) return std::nullopt;
  return SeparatorResult{best->sep, best->score, candidates, best_start, restarts_ok};
}

inline std::optional<SeparatorResult> find_separator(const PointSet& points, const PointSet& queries, double r,
                                                     const SeparatorSearchConfig& cfg) {
  switch (cfg.mode) {
    case SeparatorMode::exact_small: return find_separator_exact_small(points, queries, r, cfg);
    case SeparatorMode::local_search: return find_separator_local(points, queries, r, cfg);
    case SeparatorMode::grid_oracle: return find_separator_grid(points, queries, r, cfg);
  }
  return std::nullopt;
}

/// Median-distance split used when the configured search fails: splits at
/// the middle distinct distance from the centroid, moving the center far out
/// along the widest axis when that would need r_s <= 0. nullopt when every
/// point coincides.
inline std::optional<RingSeparator> fallback_separator(const PointSet& points, std::span<const Index> ids, double r) {
  detail::require(!ids.empty(), "fallback_separator: empty node");
  const std::size_t d = points.dim();
  std::vector<double> c(d, 0.0);
  for (Index i : ids)
    for (std::size_t k = 0; k < d; ++k) c[k] += points[i][k];
  for (double& x : c) x /= static_cast<double>(ids.size());

  auto try_center = [&](const std::vector<double>& center) -> std::optional<RingSeparator> {
    std::vector<double> dist;
    dist.reserve(ids.size());
    for (Index i : ids) dist.push_back(distance(center, points[i]));
    std::sort(dist.begin(), dist.end());
    const std::size_t half = dist.size() / 2;
    std::optional<std::size_t> cut;
    for (std::size_t off = 0; off <= dist.size(); ++off) {
      for (std::size_t k : {half + off, half - std::min(half, off)}) {
        if (k >= 1 && k < dist.size() && dist[k - 1] < dist[k]) {
          cut = k;
          break;
        }
      }
      if (cut) break;
    }
    if (!cut) return std::nullopt;
    const double t = 0.5 * (dist[*cut - 1] + dist[*cut]);
    if (!(t - r > 0.0)) return std::nullopt;
    return RingSeparator(center, t - r, r);
  };
  if (auto s = try_center(c)) return s;

  double radius = 0.0;
  std::vector<double> var(d, 0.0);
  for (Index i : ids) {
    radius = std::max(radius, distance(c, points[i]));
    for (std::size_t k = 0; k < d; ++k) var[k] += (points[i][k] - c[k]) * (points[i][k] - c[k]);
  }
  if (!(radius > 0.0)) return std::nullopt;
  std::vector<std::size_t> axes(d);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::stable_sort(axes.begin(), axes.end(), [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
  for (std::size_t axis : axes) {
    auto far = c;
    far[axis] += 2.0 * radius + 2.0 * r;
    if (auto s = try_center(far)) return s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// build and query

struct RingBuildLogEntry {
  std::size_t node = 0;
  std::size_t depth = 0;
  std::size_t size = 0;
  std::size_t queries = 0;  // sample centers used for this node
  std::string method;       // leaf, exact_small, local_search, grid_oracle, fallback
  std::size_t mass = 0;
  std::size_t mass_r = 0;
  std::size_t inner = 0;
  std::size_t outer = 0;
  std::string note;
};

using RingBuildLog = std::vector<RingBuildLogEntry>;

inline std::string build_log_csv(const RingBuildLog& log) {
  std::string out = "node,depth,size,queries,method,mass,mass_r,inner,outer,note\n";
  for (const auto& e : log) {
    out += std::to_string(e.node) + ',' + std::to_string(e.depth) + ',' + std::to_string(e.size) + ',' +
           std::to_string(e.queries) + ',' + e.method + ',' + std::to_string(e.mass) + ',' + std::to_string(e.mass_r) +
           ',' + std::to_string(e.inner) + ',' + std::to_string(e.outer) + ',' + e.note + '\n';
  }
  return out;
}

namespace detail {

inline std::vector<Index> reservoir(std::span<const Index> ids, std::size_t k, std::mt19937_64& rng) {
  std::vector<Index> out;
  if (k >= ids.size()) return std::vector<Index>(ids.begin(), ids.end());
  std::sample(ids.begin(), ids.end(), std::back_inserter(out), k, rng);
  return out;
}

inline std::vector<Index> distance_filter(const PointSet& points, std::span<const Index> ids, const PointSet& centers,
                                          double r) {
  const std::size_t d = points.dim();
  std::vector<double> c(d, 0.0);
  for (Index i : ids)
    for (std::size_t k = 0; k < d; ++k) c[k] += points[i][k];
  for (double& x : c) x /= static_cast<double>(ids.size());
  double radius = 0.0;
  for (Index i : ids) radius = std::max(radius, distance(c, points[i]));
  std::vector<Index> out;
  for (Index j = 0; j < centers.size(); ++j)
    if (distance(c, centers[j]) <= radius + 2.0 * r) out.push_back(j);
  return out;
}

}  // namespace detail

/// Recursive ring-separator tree over P for fixed-radius queries of radius r,
/// adapted to the sample centers S. Nodes above leaf_capacity are split by
/// cfg.mode; failed or unbalanced searches fall back to the median-distance
/// split (recorded in the log).
inline RingTree build_ring_tree(const PointSet& points, const PointSet& centers, double r,
                                const SeparatorSearchConfig& cfg, RingBuildLog* log = nullptr) {
  cfg.validate();
  detail::require(!points.empty(), "build_ring_tree: empty point set");
  detail::require(std::isfinite(r) && r > 0.0, "build_ring_tree: r must be > 0");
  detail::require(centers.empty() || centers.dim() == points.dim(), "build_ring_tree: query dimension mismatch");
  if (cfg.mode == SeparatorMode::grid_oracle)
    detail::require(points.dim() <= 2, "build_ring_tree: grid_oracle needs dimension <= 2");
  const std::size_t point_sample = cfg.point_sample > 0 ? cfg.point_sample : std::max<std::size_t>(centers.size(), 1);

  std::vector<Index> order(points.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<PartitionTree::Node> nodes{{0, static_cast<std::uint32_t>(points.size()), PartitionTree::kNone,
                                          PartitionTree::kNone}};
  std::vector<std::optional<RingSeparator>> seps(1);
  std::vector<Index> all_queries(centers.size());
  std::iota(all_queries.begin(), all_queries.end(), Index{0});

  struct Work {
    std::size_t node;
    std::size_t depth;
    std::vector<Index> queries;
  };
  std::vector<Work> stack;
  stack.push_back({0, 0, all_queries});
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    const auto nd = nodes[w.node];
    const std::span<const Index> ids(order.data() + nd.begin, nd.size());
    RingBuildLogEntry entry;
    entry.node = w.node;
    entry.depth = w.depth;
    entry.size = ids.size();
    if (ids.size() <= cfg.leaf_capacity) {
      entry.method = "leaf";
      if (log) log->push_back(entry);
      continue;
    }

    std::vector<Index> node_queries =
        cfg.filter == QueryFilter::distance ? detail::distance_filter(points, ids, centers, r) : w.queries;
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, w.node));
    std::size_t p_budget = point_sample, q_budget = node_queries.size();
    if (cfg.mode == SeparatorMode::exact_small) {
      const std::size_t total = std::min(ids.size(), p_budget) + q_budget;
      if (total > cfg.exact_max_elements) {
        const double f = static_cast<double>(cfg.exact_max_elements) / static_cast<double>(total);
        p_budget = std::max<std::size_t>(points.dim() + 1, static_cast<std::size_t>(f * std::min(ids.size(), p_budget)));
        q_budget = cfg.exact_max_elements - std::min(cfg.exact_max_elements, p_budget);
      }
    }
    const auto p_ids = detail::reservoir(ids, p_budget, rng);
    const auto q_ids = detail::reservoir(node_queries, q_budget, rng);
    const PointSet sub_p = points.subset(p_ids);
    const PointSet sub_q = centers.empty() ? PointSet(points.dim(), {}) : centers.subset(q_ids);
    entry.queries = q_ids.size();

    std::optional<RingSeparator> sep;
    if (sub_p.size() >= std::max<std::size_t>(2, points.dim() + 1)) {
      SeparatorSearchConfig node_cfg = cfg;
      node_cfg.seed = detail::mix_seed(cfg.seed ^ 0xa5a5a5a5ull, w.node);
      if (auto res = find_separator(sub_p, sub_q, r, node_cfg)) {
        sep = res->separator;
        entry.method = to_string(cfg.mode);
      } else {
        entry.note = "no balanced candidate";
      }
    } else {
      entry.note = "too few points for search";
    }

    std::vector<char> inner(ids.size());
    auto split_counts = [&](const RingSeparator& s) {
      std::size_t in = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) in += (inner[k] = s.is_inner(points[ids[k]]) ? 1 : 0);
      return in;
    };
    std::size_t n_in = 0;
    if (sep) {
      n_in = split_counts(*sep);
      const std::size_t lo = std::min(n_in, ids.size() - n_in);
      if (n_in == 0 || n_in == ids.size() || static_cast<double>(lo) < cfg.beta * static_cast<double>(ids.size())) {
        entry.note = "unbalanced on full node";
        sep.reset();
      }
    }
    if (!sep) {
      sep = fallback_separator(points, ids, r);
      entry.method = "fallback";
      if (sep) n_in = split_counts(*sep);
      if (!sep || n_in == 0 || n_in == ids.size()) {
        entry.method = "leaf";
        entry.note += entry.note.empty() ? "degenerate node" : "; degenerate node";
        if (log) log->push_back(entry);
        continue;
      }
    }

    if (!node_queries.empty()) {
      const PointSet nq = centers.subset(node_queries);
      const auto s = detail::score_separator(PointSet(points.dim(), {}), nq, sep->center, sep->inner_radius, r);
      entry.mass = s.mass;
      entry.mass_r = s.mass_r;
    }
    entry.inner = n_in;
    entry.outer = ids.size() - n_in;
    if (log) log->push_back(entry);

    std::vector<Index> in_ids, out_ids;
    for (std::size_t k = 0; k < ids.size(); ++k) (inner[k] ? in_ids : out_ids).push_back(ids[k]);
    std::copy(in_ids.begin(), in_ids.end(), order.begin() + nd.begin);
    std::copy(out_ids.begin(), out_ids.end(), order.begin() + nd.begin + in_ids.size());

    std::vector<Index> q_in, q_out;
    if (cfg.filter == QueryFilter::routing) {
      for (Index j : w.queries) {
        const Route rt = route(*sep, centers[j]);
        if (rt != Route::outer) q_in.push_back(j);
        if (rt != Route::inner) q_out.push_back(j);
      }
    }
    const auto mid = static_cast<std::uint32_t>(nd.begin + in_ids.size());
    const auto l = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({nd.begin, mid, PartitionTree::kNone, PartitionTree::kNone});
    nodes.push_back({mid, nd.end, PartitionTree::kNone, PartitionTree::kNone});
    nodes[w.node].left = l;
    nodes[w.node].right = l + 1;
    seps[w.node] = std::move(sep);
    seps.resize(nodes.size());
    stack.push_back({static_cast<std::size_t>(l + 1), w.depth + 1, std::move(q_out)});
    stack.push_back({static_cast<std::size_t>(l), w.depth + 1, std::move(q_in)});
  }
  return RingTree(PartitionTree(std::move(order), std::move(nodes)), std::move(seps), r, cfg.leaf_capacity);
}

struct RingQueryStats {
  std::size_t nodes_visited = 0;
  std::size_t both_children = 0;  // internal nodes where both subtrees were searched
};

/// Reports P intersected with the closed ball B(q, r).
inline std::vector<Index> query_ring_tree(const RingTree& tree, const PointSet& points, PointView q,
                                          RingQueryStats* stats = nullptr) {
  detail::require(points.size() == tree.num_points(), "query_ring_tree: tree/point set size mismatch");
  detail::require(q.size() == points.dim(), "query_ring_tree: dimension mismatch");
  const double r2 = tree.search_radius() * tree.search_radius();
  const auto& layout = tree.layout();
  std::vector<Index> out;
  RingQueryStats st;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    ++st.nodes_visited;
    const auto& nd = layout.node(v);
    if (nd.is_leaf()) {
      for (Index i : layout.points(v))
        if (squared_distance(q, points[i]) <= r2) out.push_back(i);
      continue;
    }
    switch (route(*tree.separator(v), q)) {
      case Route::inner: stack.push_back(static_cast<std::size_t>(nd.left)); break;
      case Route::outer: stack.push_back(static_cast<std::size_t>(nd.right)); break;
      case Route::both:
        ++st.both_children;
        stack.push_back(static_cast<std::size_t>(nd.right));
        stack.push_back(static_cast<std::size_t>(nd.left));
        break;
    }
  }
  if (stats) *stats = st;
  return out;
}

// ---------------------------------------------------------------------------
// sample size and sparsity

/// Query-sample size for uniform annulus-frequency estimates, via the
/// general formula with d_eff = 2(d+1).
inline std::size_t ring_sample_size(std::size_t d, double eta, double delta, double c_univ) {
  detail::require(d >= 1, "ring_sample_size: d must be >= 1");
  return sample_size(SampleSizeParams{2.0 * static_cast<double>(d + 1), delta, c_univ}, eta);
}

struct SparsityEstimate {
  double alpha = 0.0;
  double r = 0.0;
  std::string method;
};

/// Largest fraction of the sample inside a closed radius-r ball centered at
/// a sample point. Balls are restricted to sample centers, so this tends to
/// underestimate the true sparsity constant.
inline SparsityEstimate estimate_sparsity(const PointSet& sample, double r) {
  detail::require(!sample.empty(), "estimate_sparsity: empty sample");
  detail::require(std::isfinite(r) && r >= 0.0, "estimate_sparsity: r must be >= 0");
  const double r2 = r * r;
  std::size_t best = 0;
  for (Index i = 0; i < sample.size(); ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < sample.size(); ++j) c += squared_distance(sample[i], sample[j]) <= r2 ? 1 : 0;
    best = std::max(best, c);
  }
  return {static_cast<double>(best) / static_cast<double>(sample.size()), r, "max over sample-centered balls"};
}

}  // namespace qdrs
