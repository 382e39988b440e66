// One line per acceptance criterion: PASS/FAIL, the measured values and the
// runtime against its budget. Exit status is the number of failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "qdrs/qdrs.hpp"
#include "test_util.hpp"

using namespace qdrs;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;
std::vector<int> only;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = out.ok && in_time;
  failures += pass ? 0 : 1;
  std::printf("%s criterion %d (%s): %s; %.1fs of %.0fs%s\n", pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs,
              budget_s, in_time ? "" : " (over budget)");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Index> sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// ---------------------------------------------------------------------------

Outcome stab_inequalities() {
  std::mt19937_64 rng(2024);
  std::size_t checks = 0, bad_a = 0, bad_b = 0, bad_c = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 2 + rng() % 63;
    const std::size_t d = 1 + rng() % 4;
    const auto pts = tu::random_points(n, d, rng);
    std::vector<BallRange> sample;
    for (int k = 0; k < 30; ++k) sample.push_back(tu::random_ball(d, rng));
    const auto mst = build_query_driven_tree(pts, std::span<const BallRange>(sample), 1);
    const auto random_tree = tu::random_spanning_tree(n, rng);
    const auto mst_tree = min_stab_spanning_tree(build_weighted_graph(pts, std::span<const BallRange>(sample)));
    const auto random_ptree = tu::random_partition_tree(n, rng);
    const double factor = static_cast<double>(2 * ceil_log2(n) + 1);
    for (int k = 0; k < 200; ++k) {
      const auto q = tu::random_ball(d, rng);
      for (const SpanningTree* t : {&random_tree, &mst_tree}) {
        const auto path = tree_to_path(*t);
        bad_a += stab_count(path, q, pts) > 2 * stab_count(*t, q, pts);
        const auto pt = path_to_partition_tree(path, 1);
        bad_b += static_cast<double>(visiting_number(pt, q, pts)) > factor * static_cast<double>(stab_count(path, q, pts)) + 1.0;
      }
      for (const PartitionTree* t : {&mst, &random_ptree})
        bad_c += stab_count(partition_tree_to_path(*t), q, pts) > visiting_number(*t, q, pts);
      ++checks;
    }
  }
  return {bad_a + bad_b + bad_c == 0,
          fmt("%zu queries, violations (a) %zu (b) %zu (c) %zu", checks, bad_a, bad_b, bad_c)};
}

Outcome mst_optimality() {
  const auto all = enumerate_spanning_trees(6);
  std::size_t bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto pts = tu::random_points(6, 2, rng);
    std::vector<BallRange> sample;
    for (int k = 0; k < 40; ++k) sample.push_back(tu::random_ball(2, rng));
    auto total = [&](const SpanningTree& t) {
      std::size_t s = 0;
      for (const auto& q : sample) s += stab_count(t, q, pts);
      return s;
    };
    const auto tree = min_stab_spanning_tree(build_weighted_graph(pts, std::span<const BallRange>(sample)));
    std::size_t best = SIZE_MAX;
    for (const auto& t : all) best = std::min(best, total(t));
    bad += total(tree) != best;
  }
  return {bad == 0 && all.size() == 1296, fmt("%zu spanning trees enumerated, %zu/20 mismatches", all.size(), bad)};
}

Outcome estimation_interval() {
  std::mt19937_64 rng(31);
  const auto pts = tu::random_points(5, 2, rng);
  DiscreteQueryDistribution dist;
  std::uniform_real_distribution<double> w(0.5, 1.5);
  double total = 0.0;
  for (int k = 0; k < 10; ++k) {
    dist.support.push_back(tu::random_ball(2, rng));
    dist.probabilities.push_back(w(rng));
    total += dist.probabilities.back();
  }
  for (double& p : dist.probabilities) p /= total;
  // balls in the plane: D = 3
  const std::size_t m = sample_size({3.0, 0.05, 4.0}, 1.0 / 5.0);
  std::size_t seeds_with_violation = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    seeds_with_violation += estimation_interval_check(pts, dist, m, seed).violations > 0;
  return {seeds_with_violation <= 1, fmt("m = %zu, seeds with a violation %zu/20", m, seeds_with_violation)};
}

Outcome ring_tree_exactness() {
  struct Case {
    std::size_t n, d;
    SeparatorMode mode;
    QueryFilter filter;
    double r;
    bool polish;
  };
  const std::vector<Case> cases{
      {2000, 2, SeparatorMode::local_search, QueryFilter::distance, 0.5, true},
      {200, 2, SeparatorMode::exact_small, QueryFilter::distance, 0.5, true},
      {300, 2, SeparatorMode::grid_oracle, QueryFilter::routing, 0.5, true},
      {1000, 1, SeparatorMode::exact_small, QueryFilter::routing, 0.3, true},
      {2000, 3, SeparatorMode::local_search, QueryFilter::distance, 1.0, true},
      {2000, 4, SeparatorMode::local_search, QueryFilter::routing, 1.5, true},
      {1500, 5, SeparatorMode::local_search, QueryFilter::distance, 1.5, false},
      {1500, 6, SeparatorMode::local_search, QueryFilter::routing, 1.5, true},
      {2000, 8, SeparatorMode::local_search, QueryFilter::routing, 1.5, true},
      {1000, 8, SeparatorMode::local_search, QueryFilter::distance, 1.5, true},
  };
  std::size_t queries = 0, mismatches = 0, seed = 0;
  std::string modes;
  for (const auto& c : cases) {
    ++seed;
    PointSpec ps;
    ps.kind = PointGenerator::gaussian_mixture;
    ps.n = c.n;
    ps.dim = c.d;
    ps.seed = 500 + seed;
    const auto pts = generate_points(ps);
    const auto build_sample = sample_near_point_queries(pts, c.n, 0.5, c.r, 600 + seed);
    SeparatorSearchConfig cfg;
    cfg.mode = c.mode;
    cfg.filter = c.filter;
    cfg.polish = c.polish;
    cfg.seed = seed;
    cfg.grid_pitch = 0.05;
    cfg.grid_margin = 0.25;
    const auto t0 = std::chrono::steady_clock::now();
    const auto tree = build_ring_tree(pts, build_sample.centers(), c.r, cfg);
    const double build_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!tree.consistent_with(pts)) return {false, fmt("tree %zu inconsistent with its separators", seed)};
    auto held = sample_near_point_queries(pts, 900, 0.5, c.r, 700 + seed);
    std::mt19937_64 rng(800 + seed);
    std::normal_distribution<double> g(0.0, 6.0);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> center(c.d);
      for (double& x : center) x = g(rng);
      held.queries.emplace_back(std::move(center), c.r);
    }
    for (const auto& q : held.queries) {
      mismatches += sorted(query_ring_tree(tree, pts, q.center)) != linear_scan(pts, q);
      ++queries;
    }
    modes += fmt("%s d=%zu n=%zu %.1fs; ", to_string(c.mode), c.d, c.n, build_s);
  }
  return {mismatches == 0, fmt("%zu queries over 10 trees, %zu mismatches [%s]", queries, mismatches,
                               modes.substr(0, modes.size() - 2).c_str())};
}

Outcome exact_vs_grid() {
  std::size_t worse = 0, unbalanced = 0, successes = 0, exact_failed = 0;
  std::size_t mass_exact = 0, mass_grid = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PointSpec spec;
    spec.kind = PointGenerator::gaussian_mixture;
    spec.n = 40;
    spec.dim = 2;
    spec.clusters = 3;
    spec.spread = 4.0;
    spec.cluster_sd = 0.7;
    spec.seed = 900 + seed;
    const auto pts = generate_points(spec);
    const auto qs = sample_near_point_queries(pts, 80, 0.8, 0.4, 950 + seed).centers();
    SeparatorSearchConfig cfg;
    const auto exact = find_separator_exact_small(pts, qs, 0.4, cfg);
    const auto grid = find_separator_grid(pts, qs, 0.4, cfg);
    if (!exact) {
      exact_failed += grid.has_value();
      continue;
    }
    ++successes;
    unbalanced += !exact->score.balanced(cfg.beta);
    if (grid) {
      worse += exact->score.mass > grid->score.mass + 1;
      mass_exact += exact->score.mass;
      mass_grid += grid->score.mass;
    }
  }
  return {worse == 0 && unbalanced == 0 && exact_failed == 0,
          fmt("|P u S| = 120, %zu/10 successes, exact worse than grid+1: %zu, unbalanced: %zu, total mass exact %zu vs "
              "grid %zu",
              successes, worse, unbalanced, mass_exact, mass_grid)};
}

Outcome classifier_suite() {
  // gradients of the 16-8 network on real training samples
  PointSpec spec;
  spec.kind = PointGenerator::gaussian_mixture;
  spec.n = 5000;
  spec.dim = 30;
  spec.seed = 41;
  const auto pts = jl_project(generate_points(spec), 15, 42);
  std::vector<Index> ids(pts.size());
  std::iota(ids.begin(), ids.end(), Index{0});
  const RangeSamplerParams sampler;
  const auto train_set = generate_training_set(pts, ids, 50000, 1, sampler);
  const auto held_out = generate_training_set(pts, ids, 5000, 2, sampler);

  Standardizer st;
  {
    std::vector<std::vector<double>> raw;
    for (std::size_t k = 0; k < 1000; ++k) raw.push_back(range_features(train_set.ranges[k].range));
    st = Standardizer::fit(raw);
  }
  const auto batch_all = to_samples(st, std::span<const LabeledRange>(train_set.ranges).first(16));
  MLP net({16, 16, 8, 3}, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& b : net.biases)
    for (double& v : b) v = g(rng);
  const std::array<double, kNumClasses> cw{1.2, 0.8, 1.0};
  Gradients grad(net);
  loss_and_gradient(net, batch_all, cw, grad);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    for (bool bias : {false, true}) {
      auto& params = bias ? net.biases[l] : net.weights[l];
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up = loss(net, batch_all, cw);
        params[k] = keep - h;
        const double down = loss(net, batch_all, cw);
        params[k] = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = bias ? grad.biases[l][k] : grad.weights[l][k];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
      }
    }

  ClassifierConfig cfg;
  cfg.hidden = {16, 8};
  cfg.sgd.seed = 5;
  const auto clf = fit_range_classifier(train_set.ranges, cfg);
  std::vector<StabResult> preds, labels;
  for (const auto& r : held_out.ranges) {
    preds.push_back(clf.predict(r.range));
    labels.push_back(r.label);
  }
  const double plain = plain_accuracy(preds, labels);
  const double ctx = context_aware_accuracy(preds, labels);
  return {worst <= 1e-4 && ctx >= 0.95 && ctx >= plain,
          fmt("max gradient rel. error %.2e, held-out context-aware %.4f, plain %.4f", worst, ctx, plain)};
}

Outcome visiting_trend() {
  ExperimentConfig cfg;
  cfg.name = "trend";
  cfg.tree = TreeKind::partition;
  cfg.points.kind = PointGenerator::gaussian_mixture;
  cfg.points.n = 10000;
  cfg.points.dim = 30;
  cfg.points.seed = 7;
  cfg.jl_dim = 15;
  cfg.jl_seed = 11;
  cfg.heldout = 1000;
  cfg.ladder = {0, 1000, 5000, 20000};
  cfg.seeds = {1, 2, 3, 4, 5};
  const auto rows = run_experiment(cfg);
  const auto trend = trend_summary(rows);
  std::string medians;
  std::vector<double> med;
  for (std::size_t m : cfg.ladder) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.sample_size == m) v.push_back(r.mean_nodes_visited);
    med.push_back(median(v));
    medians += fmt("%zu:%.1f ", m, med.back());
  }
  const bool monotone = std::is_sorted(med.rbegin(), med.rend());
  return {trend.non_increasing >= 4 && trend.largest_beats_smallest >= 4,
          fmt("rho <= 0 in %zu/5 seeds, largest beats size 0 in %zu/5, median nodes visited %s(%s)",
              trend.non_increasing, trend.largest_beats_smallest, medians.c_str(),
              monotone ? "non-increasing" : "not monotone")};
}

Outcome query_soundness() {
  std::mt19937_64 rng(77);
  std::size_t instances = 0, mismatches = 0, clf_queries = 0, imprecise = 0;
  for (; instances < 10000; ++instances) {
    const std::size_t n = 1 + rng() % 120;
    const std::size_t d = 1 + rng() % 5;
    const auto pts = tu::random_points(n, d, rng);
    const std::size_t cap = 1 + rng() % 4;
    PartitionTree tree;
    switch (rng() % 3) {
      case 0: tree = tu::random_partition_tree(n, rng, cap); break;
      case 1: tree = random_order_tree(n, cap, rng()); break;
      default: {
        std::vector<BallRange> sample;
        for (int k = 0; k < 10; ++k) sample.push_back(tu::random_ball(d, rng));
        tree = build_query_driven_tree(pts, std::span<const BallRange>(sample), cap);
      }
    }
    const PartitionIndex index(tree, pts);
    const auto q = tu::random_ball(d, rng, -0.2, 1.2, 0.8);
    const auto truth = linear_scan(pts, q);
    mismatches += sorted(query_exact(index, q).result) != truth;
    mismatches += sorted(query_exact(index, q, QueryOptions{false}).result) != truth;

    // classifier mode with arbitrary verdicts never reports outside q
    const ConstantClassifier verdict(tree.num_nodes(), static_cast<StabResult>(rng() % 3));
    for (const auto* clf : {static_cast<const NodeClassifier*>(&verdict)}) {
      const auto rep = query_with_classifier(index, q, *clf);
      for (Index i : rep.result) imprecise += !ball_contains(q, pts[i]);
      ++clf_queries;
    }
  }

  // and a trained classifier set on a larger clustered instance
  PointSpec spec;
  spec.kind = PointGenerator::gaussian_mixture;
  spec.n = 3000;
  spec.dim = 10;
  spec.seed = 3;
  const auto pts = jl_project(generate_points(spec), 5, 4);
  BallQuerySpec qs;
  qs.m = 500;
  qs.dim = 5;
  qs.seed = 6;
  const auto tree = build_query_driven_tree(pts, generate_ball_queries(qs), 4);
  NodeTrainingConfig tc;
  tc.samples_per_node = 5000;
  const auto clfs = train_node_classifiers(tree, pts, tc);
  const PartitionIndex index(tree, pts);
  qs.seed = 7;
  qs.m = 1000;
  std::vector<std::vector<Index>> results, truth;
  for (const auto& q : generate_ball_queries(qs).queries) {
    results.push_back(query_with_classifier(index, q, clfs).result);
    truth.push_back(linear_scan(pts, q));
    ++clf_queries;
  }
  const auto acc = accuracy_report(results, truth);
  const bool precise = imprecise == 0 && acc.precision == 1.0;
  return {mismatches == 0 && precise,
          fmt("%zu exact instances, %zu mismatches; %zu classifier-mode queries, precision %.6f (trained set recall "
              "%.4f)",
              instances, mismatches, clf_queries, imprecise == 0 ? acc.precision : 0.0, acc.recall)};
}

}  // namespace

// optional arguments: criterion ids to run
int main(int argc, char** argv) {
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  criterion(1, "visiting and stabbing inequalities", 30, stab_inequalities);
  criterion(2, "stab-weight MST equals the enumerated optimum", 10, mst_optimality);
  criterion(3, "estimation interval at the formula sample size", 60, estimation_interval);
  criterion(4, "ring-tree queries equal linear scan", 60, ring_tree_exactness);
  criterion(5, "exact separator against the grid oracle", 120, exact_vs_grid);
  criterion(6, "classifier gradients and held-out accuracy", 300, classifier_suite);
  criterion(7, "visiting number falls with sample size", 600, visiting_trend);
  criterion(8, "query soundness", 120, query_soundness);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
