#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "qdrs/classifier.hpp"
#include "qdrs/errors.hpp"
#include "qdrs/generators.hpp"
#include "qdrs/io.hpp"
#include "qdrs/partition_query.hpp"
#include "qdrs/ringtree.hpp"
#include "qdrs/tree_select.hpp"

namespace qdrs {

enum class TreeKind { partition, ring };

inline const char* to_string(TreeKind k) noexcept { return k == TreeKind::partition ? "ptree" : "ringtree"; }

inline TreeKind parse_tree_kind(const std::string& s) {
  if (s == "ptree") return TreeKind::partition;
  if (s == "ringtree") return TreeKind::ring;
  throw usage_error("unknown tree kind '" + s + "' (expected ptree or ringtree)");
}

struct ExperimentConfig {
  std::string name = "experiment";
  TreeKind tree = TreeKind::partition;

  std::string points_file;  // empty: use the generator
  PointSpec points;
  std::size_t jl_dim = 0;  // 0: no projection
  std::uint64_t jl_seed = 0;

  // ptree protocol: N(0, center_sd^2) centers, |N(0, radius_sd^2)| radii
  double center_sd = 1.0;
  double radius_sd = 4.0;
  // ringtree protocol: centers near random points, fixed radius
  double jitter = 0.5;
  double ring_radius = 1.5;
  std::size_t heldout = 1000;

  std::vector<std::size_t> ladder{0, 1000, 5000};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  std::size_t leaf_capacity = 1;
  QueryMode query_mode = QueryMode::exact;
  std::size_t clf_min_node_size = 256;
  std::size_t clf_samples_per_node = 20000;
  std::vector<std::size_t> clf_hidden{16, 8};

  SeparatorSearchConfig ring;

  bool record_timings = true;
  std::string metrics_out;
  std::string report_out;

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

inline std::string fmt_double(double v) {
  std::string s;
  io::detail::append_double(s, v);
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw usage_error("config: bad value '" + v + "' for '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw usage_error("config: bad boolean '" + v + "' for '" + key + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::string tok;
  std::istringstream in(v);
  while (std::getline(in, tok, ',')) out.push_back(parse_number<T>(key, trim(tok)));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(xs[k]);
  }
  return s;
}

inline QueryMode parse_query_mode(const std::string& s) {
  if (s == "exact") return QueryMode::exact;
  if (s == "classifier") return QueryMode::classifier;
  throw usage_error("unknown query mode '" + s + "' (expected exact or classifier)");
}

// One accessor per config key, in file order.
struct ConfigField {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

// `ref` maps a config to the member it names (const and non-const).
template <class Ref>
ConfigField field(const char* key, Ref ref) {
  using T = std::remove_cvref_t<decltype(ref(std::declval<ExperimentConfig&>()))>;
  auto get = [ref](const ExperimentConfig& c) -> std::string {
    const T& v = ref(c);
    if constexpr (std::is_same_v<T, std::string>) return v;
    else if constexpr (std::is_same_v<T, bool>) return v ? "1" : "0";
    else if constexpr (std::is_floating_point_v<T>) return fmt_double(v);
    else return std::to_string(v);
  };
  auto set = [ref, key](ExperimentConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) ref(c) = v;
    else if constexpr (std::is_same_v<T, bool>) ref(c) = parse_bool(key, v);
    else ref(c) = parse_number<T>(key, v);
  };
  return ConfigField{key, get, set};
}

template <class Ref, class Fmt, class Parse>
ConfigField custom_field(const char* key, Ref ref, Fmt fmt, Parse parse) {
  return ConfigField{key, [ref, fmt](const ExperimentConfig& c) { return std::string(fmt(ref(c))); },
                     [ref, parse](ExperimentConfig& c, const std::string& v) { ref(c) = parse(v); }};
}

template <class Ref, class T = std::remove_cvref_t<decltype(std::declval<Ref>()(std::declval<ExperimentConfig&>()))>>
ConfigField list_field(const char* key, Ref ref) {
  using E = typename T::value_type;
  return ConfigField{key, [ref](const ExperimentConfig& c) { return join(ref(c)); },
                     [ref, key](ExperimentConfig& c, const std::string& v) { ref(c) = parse_list<E>(key, v); }};
}

#define QDRS_REF(expr) [](auto& c) -> auto& { return c.expr; }

inline const std::vector<ConfigField>& config_fields() {
  auto enum_name = [](auto v) { return to_string(v); };
  static const std::vector<ConfigField> fields{
      field("name", QDRS_REF(name)),
      custom_field("tree", QDRS_REF(tree), enum_name, parse_tree_kind),
      field("points.file", QDRS_REF(points_file)),
      custom_field("points.generator", QDRS_REF(points.kind), enum_name, parse_point_generator),
      field("points.n", QDRS_REF(points.n)),
      field("points.dim", QDRS_REF(points.dim)),
      field("points.seed", QDRS_REF(points.seed)),
      field("points.lo", QDRS_REF(points.lo)),
      field("points.hi", QDRS_REF(points.hi)),
      field("points.clusters", QDRS_REF(points.clusters)),
      field("points.spread", QDRS_REF(points.spread)),
      field("points.cluster_sd", QDRS_REF(points.cluster_sd)),
      field("points.jl_dim", QDRS_REF(jl_dim)),
      field("points.jl_seed", QDRS_REF(jl_seed)),
      field("queries.center_sd", QDRS_REF(center_sd)),
      field("queries.radius_sd", QDRS_REF(radius_sd)),
      field("queries.jitter", QDRS_REF(jitter)),
      field("queries.radius", QDRS_REF(ring_radius)),
      field("queries.heldout", QDRS_REF(heldout)),
      list_field("ladder", QDRS_REF(ladder)),
      list_field("seeds", QDRS_REF(seeds)),
      field("ptree.leaf_capacity", QDRS_REF(leaf_capacity)),
      custom_field("ptree.query_mode", QDRS_REF(query_mode), enum_name, parse_query_mode),
      field("classifier.min_node_size", QDRS_REF(clf_min_node_size)),
      field("classifier.samples_per_node", QDRS_REF(clf_samples_per_node)),
      list_field("classifier.hidden", QDRS_REF(clf_hidden)),
      custom_field("ring.mode", QDRS_REF(ring.mode), enum_name, parse_separator_mode),
      field("ring.beta", QDRS_REF(ring.beta)),
      field("ring.restarts", QDRS_REF(ring.restarts)),
      field("ring.pool_size", QDRS_REF(ring.pool_size)),
      field("ring.max_iterations", QDRS_REF(ring.max_iterations)),
      field("ring.leaf_capacity", QDRS_REF(ring.leaf_capacity)),
      field("ring.point_sample", QDRS_REF(ring.point_sample)),
      field("ring.exact_max_elements", QDRS_REF(ring.exact_max_elements)),
      custom_field("ring.filter", QDRS_REF(ring.filter), enum_name, parse_query_filter),
      field("ring.polish", QDRS_REF(ring.polish)),
      field("record_timings", QDRS_REF(record_timings)),
      field("metrics_out", QDRS_REF(metrics_out)),
      field("report_out", QDRS_REF(report_out)),
  };
  return fields;
}

#undef QDRS_REF

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (points_file.empty()) points.validate();
  detail::require(!ladder.empty(), "config: ladder is empty");
  detail::require(!seeds.empty(), "config: seeds is empty");
  detail::require(heldout >= 1, "config: queries.heldout must be >= 1");
  detail::require(leaf_capacity >= 1, "config: ptree.leaf_capacity must be >= 1");
  detail::require(center_sd >= 0.0 && radius_sd >= 0.0 && std::isfinite(center_sd) && std::isfinite(radius_sd),
                  "config: query spreads must be finite and >= 0");
  detail::require(jitter >= 0.0 && std::isfinite(jitter), "config: queries.jitter must be finite and >= 0");
  detail::require(ring_radius > 0.0 && std::isfinite(ring_radius), "config: queries.radius must be > 0");
  detail::require(!clf_hidden.empty(), "config: classifier.hidden is empty");
  detail::require(tree == TreeKind::partition || query_mode == QueryMode::exact,
                  "config: classifier query mode needs tree = ptree");
  ring.validate();
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (const auto& f : detail::config_fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

/// Flat `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are errors; absent keys keep their defaults.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::map<std::string, const detail::ConfigField*> by_key;
  for (const auto& f : detail::config_fields()) by_key[f.key] = &f;
  std::map<std::string, bool> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw usage_error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw usage_error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen[key]) throw usage_error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = true;
    it->second->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

inline std::string format_experiment_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  auto f = io::detail::open_in(path);
  return parse_experiment_config(f);
}

/// FNV-1a over the canonical form, output paths excluded.
inline std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& f : detail::config_fields()) {
    const std::string k = f.key;
    if (k == "metrics_out" || k == "report_out") continue;
    for (char c : k + "=" + f.get(cfg) + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsRow {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;
  double mean_query_time_ns = 0.0;
  double mean_time_per_point_ns = 0.0;
  double mean_nodes_visited = 0.0;
  double recall = 1.0;
  double build_time_ms = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsHeader =
    "config_hash,seed,sample_size,mean_query_time_ns,mean_time_per_point_ns,mean_nodes_visited,recall,build_time_ms";

inline std::string metrics_csv_line(const MetricsRow& r) {
  std::string s = r.config_hash + "," + std::to_string(r.seed) + "," + std::to_string(r.sample_size);
  for (double v : {r.mean_query_time_ns, r.mean_time_per_point_ns, r.mean_nodes_visited, r.recall, r.build_time_ms})
    s += "," + detail::fmt_double(v);
  return s;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << metrics_csv_line(r) << '\n';
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader)
    throw runtime_failure("metrics csv: missing or unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> tok;
    std::string t;
    std::istringstream ls(line);
    while (std::getline(ls, t, ',')) tok.push_back(detail::trim(t));
    if (tok.size() != 8) throw runtime_failure("metrics csv line " + std::to_string(lineno) + ": expected 8 fields");
    try {
      MetricsRow r;
      r.config_hash = tok[0];
      r.seed = detail::parse_number<std::uint64_t>("seed", tok[1]);
      r.sample_size = detail::parse_number<std::size_t>("sample_size", tok[2]);
      r.mean_query_time_ns = io::detail::parse_double(tok[3], lineno);
      r.mean_time_per_point_ns = io::detail::parse_double(tok[4], lineno);
      r.mean_nodes_visited = io::detail::parse_double(tok[5], lineno);
      r.recall = io::detail::parse_double(tok[6], lineno);
      r.build_time_ms = io::detail::parse_double(tok[7], lineno);
      rows.push_back(std::move(r));
    } catch (const usage_error& e) {
      throw runtime_failure("metrics csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// statistics

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}

/// Pearson correlation of average ranks; 0 when either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "spearman: length mismatch");
  detail::require(x.size() >= 2, "spearman: need at least 2 pairs");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double median(std::vector<double> v) {
  detail::require(!v.empty(), "median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

struct SeedTrend {
  std::uint64_t seed = 0;
  double rho = 0.0;             // spearman(sample size, mean nodes visited)
  double smallest = 0.0;        // mean nodes visited at the smallest sample size
  double largest = 0.0;         // ... and at the largest
  std::size_t smallest_size = 0;
  std::size_t largest_size = 0;
};

struct TrendSummary {
  std::vector<SeedTrend> seeds;
  std::size_t non_increasing = 0;  // seeds with rho <= 0
  std::size_t largest_beats_smallest = 0;
};

inline TrendSummary trend_summary(const std::vector<MetricsRow>& rows) {
  std::map<std::uint64_t, std::vector<const MetricsRow*>> by_seed;
  for (const auto& r : rows) by_seed[r.seed].push_back(&r);
  TrendSummary out;
  for (auto& [seed, rs] : by_seed) {
    if (rs.size() < 2) continue;
    std::sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->sample_size < b->sample_size; });
    std::vector<double> x, y;
    for (auto* r : rs) {
      x.push_back(static_cast<double>(r->sample_size));
      y.push_back(r->mean_nodes_visited);
    }
    SeedTrend t;
    t.seed = seed;
    t.rho = spearman(x, y);
    t.smallest = rs.front()->mean_nodes_visited;
    t.largest = rs.back()->mean_nodes_visited;
    t.smallest_size = rs.front()->sample_size;
    t.largest_size = rs.back()->sample_size;
    out.non_increasing += t.rho <= 0.0 ? 1 : 0;
    out.largest_beats_smallest += t.largest < t.smallest ? 1 : 0;
    out.seeds.push_back(t);
  }
  return out;
}

/// Markdown: a per-sample-size table (medians over seeds) and the per-seed trend.
inline std::string render_report(const std::vector<MetricsRow>& rows, const std::string& title = "experiment") {
  std::map<std::size_t, std::vector<const MetricsRow*>> by_size;
  for (const auto& r : rows) by_size[r.sample_size].push_back(&r);
  std::ostringstream out;
  out << "# " << title << "\n\n";
  if (!rows.empty()) out << "config " << rows.front().config_hash << ", " << rows.size() << " rows\n\n";
  out << "| sample size | seeds | mean nodes visited | mean query time (ns) | time per point (ns) | build time (ms) | recall |\n";
  out << "|---:|---:|---:|---:|---:|---:|---:|\n";
  auto med = [](const std::vector<const MetricsRow*>& rs, double MetricsRow::*f) {
    std::vector<double> v;
    for (auto* r : rs) v.push_back(r->*f);
    return median(std::move(v));
  };
  char buf[512];
  for (const auto& [size, rs] : by_size) {
    double min_recall = 1.0;
    for (auto* r : rs) min_recall = std::min(min_recall, r->recall);
    std::snprintf(buf, sizeof buf, "| %zu | %zu | %.2f | %.0f | %.1f | %.1f | %.4f |\n", size, rs.size(),
                  med(rs, &MetricsRow::mean_nodes_visited), med(rs, &MetricsRow::mean_query_time_ns),
                  med(rs, &MetricsRow::mean_time_per_point_ns), med(rs, &MetricsRow::build_time_ms), min_recall);
    out << buf;
  }
  out << "\nValues are medians over seeds; recall is the minimum.\n";
  const auto trend = trend_summary(rows);
  if (!trend.seeds.empty()) {
    out << "\n| seed | spearman rho | nodes visited (smallest size) | nodes visited (largest size) |\n";
    out << "|---:|---:|---:|---:|\n";
    for (const auto& t : trend.seeds) {
      std::snprintf(buf, sizeof buf, "| %llu | %.3f | %.2f | %.2f |\n", static_cast<unsigned long long>(t.seed), t.rho,
                    t.smallest, t.largest);
      out << buf;
    }
    out << "\nrho <= 0 in " << trend.non_increasing << "/" << trend.seeds.size()
        << " seeds; largest sample beats smallest in " << trend.largest_beats_smallest << "/" << trend.seeds.size()
        << " seeds.\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// experiment driver

namespace detail {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const usage_error& e) {
    throw usage_error("stage '" + name + "': " + e.what());
  } catch (const runtime_failure& e) {
    throw runtime_failure("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw runtime_failure("stage '" + name + "': " + e.what());
  }
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline PointSet experiment_points(const ExperimentConfig& cfg) {
  PointSet p = detail::stage("points", [&] {
    return cfg.points_file.empty() ? generate_points(cfg.points) : io::load_points(cfg.points_file);
  });
  if (cfg.jl_dim > 0) p = detail::stage("jl-project", [&] { return jl_project(p, cfg.jl_dim, cfg.jl_seed); });
  return p;
}

/// The query distribution of the chosen protocol, `m` draws.
inline QuerySample experiment_queries(const ExperimentConfig& cfg, const PointSet& points, std::size_t m,
                                      std::uint64_t seed) {
  if (cfg.tree == TreeKind::ring) return sample_near_point_queries(points, m, cfg.jitter, cfg.ring_radius, seed);
  BallQuerySpec spec;
  spec.m = m;
  spec.dim = points.dim();
  spec.seed = seed;
  spec.center_sd = cfg.center_sd;
  spec.radius_sd = cfg.radius_sd;
  return generate_ball_queries(spec);
}

inline std::uint64_t heldout_seed(std::uint64_t seed) { return detail::mix_seed(seed, 0x4845'4c44ull); }
inline std::uint64_t sample_seed(std::uint64_t seed, std::size_t m) { return detail::mix_seed(seed, 0x5341'0000ull + m); }

/// Runs every (seed, sample size) cell in order. Size 0 is the baseline: a
/// random-order partition tree, or a ring tree built without queries.
inline std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg,
                                              const std::function<void(const MetricsRow&)>& on_row = {}) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const PointSet points = experiment_points(cfg);
  std::vector<MetricsRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const QuerySample held = detail::stage("held-out queries", [&] {
      return experiment_queries(cfg, points, cfg.heldout, heldout_seed(seed));
    });
    std::vector<std::vector<Index>> truth;
    truth.reserve(held.size());
    for (const auto& q : held.queries) truth.push_back(linear_scan(points, q));

    for (std::size_t m : cfg.ladder) {
      const std::uint64_t cell_seed = sample_seed(seed, m);
      const QuerySample sample = detail::stage("sample queries", [&] {
        return m == 0 ? QuerySample{} : experiment_queries(cfg, points, m, cell_seed);
      });
      MetricsRow row;
      row.config_hash = hash;
      row.seed = seed;
      row.sample_size = m;
      std::vector<std::vector<Index>> results;
      results.reserve(held.size());
      double time_sum = 0.0, per_point_sum = 0.0, visited_sum = 0.0;
      auto record = [&](std::vector<Index> res, std::size_t visited, double ns) {
        time_sum += ns;
        per_point_sum += ns / static_cast<double>(std::max<std::size_t>(1, res.size()));
        visited_sum += static_cast<double>(visited);
        results.push_back(std::move(res));
      };

      if (cfg.tree == TreeKind::partition) {
        const auto t0 = std::chrono::steady_clock::now();
        const PartitionTree tree = detail::stage("build-ptree", [&] {
          return m == 0 ? random_order_tree(points.size(), cfg.leaf_capacity, seed)
                        : build_query_driven_tree(points, sample, cfg.leaf_capacity);
        });
        NodeClassifierSet clfs;
        if (cfg.query_mode == QueryMode::classifier) {
          clfs = detail::stage("train-classifier", [&] {
            NodeTrainingConfig tc;
            tc.min_node_size = cfg.clf_min_node_size;
            tc.samples_per_node = cfg.clf_samples_per_node;
            tc.classifier.hidden = cfg.clf_hidden;
            tc.seed = cell_seed;
            return train_node_classifiers(tree, points, tc);
          });
        }
        row.build_time_ms = detail::ms_since(t0);
        const PartitionIndex index(tree, points);
        detail::stage("query", [&] {
          for (const auto& q : held.queries) {
            auto rep = cfg.query_mode == QueryMode::classifier ? query_with_classifier(index, q, clfs)
                                                               : query_exact(index, q);
            record(std::move(rep.result), rep.nodes_visited, static_cast<double>(rep.wall_time_ns));
          }
        });
      } else {
        const auto t0 = std::chrono::steady_clock::now();
        const RingTree tree = detail::stage("build-ringtree", [&] {
          SeparatorSearchConfig rc = cfg.ring;
          rc.seed = cell_seed;
          const PointSet centers = sample.empty() ? PointSet(points.dim(), {}) : sample.centers();
          return build_ring_tree(points, centers, cfg.ring_radius, rc);
        });
        row.build_time_ms = detail::ms_since(t0);
        detail::stage("query", [&] {
          for (const auto& q : held.queries) {
            RingQueryStats st;
            const auto t1 = std::chrono::steady_clock::now();
            auto res = query_ring_tree(tree, points, q.center, &st);
            record(std::move(res), st.nodes_visited, detail::ms_since(t1) * 1e6);
          }
        });
      }

      const double nq = static_cast<double>(held.size());
      row.mean_query_time_ns = time_sum / nq;
      row.mean_time_per_point_ns = per_point_sum / nq;
      row.mean_nodes_visited = visited_sum / nq;
      row.recall = accuracy_report(results, truth).recall;
      if (!cfg.record_timings) row.mean_query_time_ns = row.mean_time_per_point_ns = row.build_time_ms = 0.0;
      if (on_row) on_row(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace qdrs
