#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qdrs/qdrs.hpp"

namespace {

using namespace qdrs;

// Writes to --out, or to stdout when no path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) file_ = std::make_unique<std::ofstream>(io::detail::open_out(path));
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw runtime_failure("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_json(const std::string& path, const json& j) {
  Output out(path);
  out.stream() << j.dump() << '\n';
  out.finish();
}

void write_points(const std::string& path, const PointSet& p) {
  if (!path.empty()) return io::save_points(path, p);
  io::write_points_csv(std::cout, p);
}

void write_queries(const std::string& path, const QuerySample& s) {
  if (!path.empty()) return io::save_queries(path, s);
  io::write_queries_csv(std::cout, s);
}

void print_stats(const PointSet& p) {
  const auto st = coordinate_stats(p);
  std::fprintf(stderr, "n=%zu d=%zu\ncoord,mean,variance\n", p.size(), p.dim());
  for (std::size_t k = 0; k < p.dim(); ++k) std::fprintf(stderr, "%zu,%.6g,%.6g\n", k, st.mean[k], st.variance[k]);
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t v = 0;
    try {
      std::size_t used = 0;
      v = std::stoul(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw usage_error("bad size list '" + s + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw usage_error("empty size list");
  return out;
}

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Common& c,
                      bool option_defaults = true) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output path (stdout when omitted)");
  if (option_defaults) sub->add_option("--config", c.config, "file of `option = value` lines; the command line wins");
  return sub;
}

// Keys are long option names without the dashes.
void apply_option_file(CLI::App& sub, const std::string& path) {
  auto f = io::detail::open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw usage_error(where + ": expected option = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key == "config") throw usage_error(where + ": nested config files are not supported");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw usage_error(where + ": unknown option '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw usage_error(where + ": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-distribution-driven range search trees"};
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-points
  Common gp_c;
  PointSpec gp;
  std::string gp_kind = "normal";
  auto* gp_cmd = add_command(app, "gen-points", "generate a point set", gp_c);
  gp_cmd->add_option("--generator", gp_kind, "normal, uniform or mixture")->capture_default_str();
  gp_cmd->add_option("--n", gp.n, "number of points")->capture_default_str();
  gp_cmd->add_option("--dim", gp.dim, "dimension")->capture_default_str();
  gp_cmd->add_option("--lo", gp.lo, "uniform box lower bound")->capture_default_str();
  gp_cmd->add_option("--hi", gp.hi, "uniform box upper bound")->capture_default_str();
  gp_cmd->add_option("--clusters", gp.clusters, "mixture components")->capture_default_str();
  gp_cmd->add_option("--spread", gp.spread, "sd of mixture means")->capture_default_str();
  gp_cmd->add_option("--cluster-sd", gp.cluster_sd, "sd within a component")->capture_default_str();
  gp_cmd->callback([&] {
    action = [&] {
      gp.kind = parse_point_generator(gp_kind);
      gp.seed = gp_c.seed;
      const auto p = generate_points(gp);
      print_stats(p);
      write_points(gp_c.out, p);
    };
  });

  // gen-queries
  Common gq_c;
  std::string gq_protocol = "ball", gq_points;
  BallQuerySpec gq_ball;
  NearPointQuerySpec gq_near;
  auto* gq_cmd = add_command(app, "gen-queries", "generate a query sample", gq_c);
  gq_cmd->add_option("--protocol", gq_protocol, "ball (random balls) or near (centers near points)")
      ->capture_default_str();
  gq_cmd->add_option("--m", gq_ball.m, "ball protocol: number of queries")->capture_default_str();
  gq_cmd->add_option("--dim", gq_ball.dim, "ball protocol: dimension")->capture_default_str();
  gq_cmd->add_option("--center-sd", gq_ball.center_sd, "ball protocol: center sd")->capture_default_str();
  gq_cmd->add_option("--radius-sd", gq_ball.radius_sd, "ball protocol: radius is |N(0, sd^2)|")->capture_default_str();
  gq_cmd->add_option("--points", gq_points, "near protocol: point file");
  gq_cmd->add_option("--per-point", gq_near.per_point, "near protocol: queries per point")->capture_default_str();
  gq_cmd->add_option("--jitter", gq_near.jitter, "near protocol: center noise sd")->capture_default_str();
  gq_cmd->add_option("--radius", gq_near.radius, "near protocol: fixed radius")->capture_default_str();
  gq_cmd->callback([&] {
    action = [&] {
      QuerySample s;
      if (gq_protocol == "ball") {
        gq_ball.seed = gq_c.seed;
        s = generate_ball_queries(gq_ball);
      } else if (gq_protocol == "near") {
        if (gq_points.empty()) throw usage_error("gen-queries: the near protocol needs --points");
        gq_near.seed = gq_c.seed;
        s = generate_near_point_queries(io::load_points(gq_points), gq_near);
      } else {
        throw usage_error("gen-queries: unknown protocol '" + gq_protocol + "' (expected ball or near)");
      }
      write_queries(gq_c.out, s);
    };
  });

  // jl-project
  Common jl_c;
  std::string jl_in;
  std::size_t jl_k = 15;
  bool jl_raw = false;
  auto* jl_cmd = add_command(app, "jl-project", "random projection plus standardization", jl_c);
  jl_cmd->add_option("--in", jl_in, "point file")->required();
  jl_cmd->add_option("--k", jl_k, "target dimension")->capture_default_str();
  jl_cmd->add_flag("--raw", jl_raw, "skip the standardization step");
  jl_cmd->callback([&] {
    action = [&] {
      const auto p = io::load_points(jl_in);
      const auto y = jl_raw ? jl_project_raw(p, jl_k, jl_c.seed) : jl_project(p, jl_k, jl_c.seed);
      print_stats(y);
      write_points(jl_c.out, y);
    };
  });

  // build-ptree
  Common bp_c;
  std::string bp_points, bp_queries;
  std::size_t bp_leaf = 1;
  auto* bp_cmd = add_command(app, "build-ptree", "build a partition tree from a query sample", bp_c);
  bp_cmd->add_option("--points", bp_points, "point file")->required();
  bp_cmd->add_option("--queries", bp_queries, "query sample csv; omitted: random leaf order from --seed");
  bp_cmd->add_option("--leaf-capacity", bp_leaf, "max points per leaf")->capture_default_str();
  bp_cmd->callback([&] {
    action = [&] {
      const auto p = io::load_points(bp_points);
      PartitionTree t;
      if (bp_queries.empty()) {
        t = random_order_tree(p.size(), bp_leaf, bp_c.seed);
      } else {
        const auto s = io::load_queries(bp_queries);
        s.check_dim(p.dim());
        t = build_query_driven_tree(p, s, bp_leaf);
      }
      std::fprintf(stderr, "nodes=%zu height=%zu\n", t.num_nodes(), t.height());
      write_json(bp_c.out, to_json(t));
    };
  });

  // build-ringtree
  Common br_c;
  std::string br_points, br_queries, br_log, br_mode = "local_search", br_filter = "distance";
  double br_r = 1.5;
  bool br_no_polish = false;
  SeparatorSearchConfig br;
  auto* br_cmd = add_command(app, "build-ringtree", "build a ring-separator tree for fixed-radius queries", br_c);
  br_cmd->add_option("--points", br_points, "point file")->required();
  br_cmd->add_option("--queries", br_queries, "query sample csv (centers are used)");
  br_cmd->add_option("--r", br_r, "search radius")->capture_default_str();
  br_cmd->add_option("--mode", br_mode, "local_search, exact_small or grid_oracle")->capture_default_str();
  br_cmd->add_option("--beta", br.beta, "balance fraction")->capture_default_str();
  br_cmd->add_option("--restarts", br.restarts, "local search restarts")->capture_default_str();
  br_cmd->add_option("--pool-size", br.pool_size, "swap pool per iteration")->capture_default_str();
  br_cmd->add_option("--max-iterations", br.max_iterations, "hill-climb cap")->capture_default_str();
  br_cmd->add_option("--leaf-capacity", br.leaf_capacity, "max points per leaf")->capture_default_str();
  br_cmd->add_option("--point-sample", br.point_sample, "per-node point subsample, 0 = query sample size")
      ->capture_default_str();
  br_cmd->add_option("--filter", br_filter, "per-node query filter: distance or routing")->capture_default_str();
  br_cmd->add_flag("--no-polish", br_no_polish, "keep r_s at the circumradius in local search");
  br_cmd->add_option("--log", br_log, "build log csv");
  br_cmd->callback([&] {
    action = [&] {
      br.mode = parse_separator_mode(br_mode);
      br.filter = parse_query_filter(br_filter);
      br.polish = !br_no_polish;
      br.seed = br_c.seed;
      const auto p = io::load_points(br_points);
      PointSet centers(p.dim(), {});
      if (!br_queries.empty()) {
        const auto s = io::load_queries(br_queries);
        s.check_dim(p.dim());
        if (!s.empty()) centers = s.centers();
      }
      RingBuildLog log;
      const auto t = build_ring_tree(p, centers, br_r, br, &log);
      std::size_t fallbacks = 0;
      for (const auto& e : log) fallbacks += e.method == "fallback" ? 1 : 0;
      std::fprintf(stderr, "nodes=%zu height=%zu fallbacks=%zu\n", t.num_nodes(), t.height(), fallbacks);
      if (!br_log.empty()) {
        auto f = io::detail::open_out(br_log);
        f << build_log_csv(log);
      }
      write_json(br_c.out, to_json(t));
    };
  });

  // train-classifier
  Common tc_c;
  std::string tc_points, tc_tree, tc_hidden = "16,8", tc_trace;
  std::size_t tc_node = 0;
  bool tc_all = false;
  NodeTrainingConfig tc;
  auto* tc_cmd = add_command(app, "train-classifier", "train node classifiers for a partition tree", tc_c);
  tc_cmd->add_option("--points", tc_points, "point file")->required();
  tc_cmd->add_option("--tree", tc_tree, "partition tree json")->required();
  tc_cmd->add_option("--node", tc_node, "node to train (single-node mode)")->capture_default_str();
  tc_cmd->add_flag("--all", tc_all, "train every internal node above --min-node-size");
  tc_cmd->add_option("--min-node-size", tc.min_node_size, "skip smaller nodes (with --all)")->capture_default_str();
  tc_cmd->add_option("--samples", tc.samples_per_node, "training ranges per node")->capture_default_str();
  tc_cmd->add_option("--hidden", tc_hidden, "hidden layer sizes, comma separated")->capture_default_str();
  tc_cmd->add_option("--lr", tc.classifier.sgd.learning_rate, "learning rate")->capture_default_str();
  tc_cmd->add_option("--batch", tc.classifier.sgd.batch_size, "batch size")->capture_default_str();
  tc_cmd->add_option("--trace", tc_trace, "loss trace csv (stdout when omitted)");
  tc_cmd->callback([&] {
    action = [&] {
      tc.classifier.hidden = parse_sizes(tc_hidden);
      tc.seed = tc_c.seed;
      if (tc_c.out.empty()) throw usage_error("train-classifier: --out is required (the loss trace goes to stdout)");
      const auto p = io::load_points(tc_points);
      const auto t = partition_tree_from_json(load_json(tc_tree));
      if (t.num_points() != p.size()) throw usage_error("train-classifier: tree does not match the point set");
      std::vector<std::pair<std::size_t, TrainResult>> traces;
      json result;
      if (tc_all) {
        result = to_json(train_node_classifiers(t, p, tc, &traces));
      } else {
        if (tc_node >= t.num_nodes()) throw usage_error("train-classifier: --node out of range");
        const std::uint64_t node_seed = tc.seed * 1000003ull + tc_node;
        const auto data = generate_training_set(p, t.points(tc_node), tc.samples_per_node, node_seed, tc.sampler);
        ClassifierConfig cc = tc.classifier;
        cc.init_seed = node_seed ^ 0x5bd1e995ull;
        cc.sgd.seed = node_seed;
        TrainResult res;
        result = to_json(fit_range_classifier(data.ranges, cc, &res));
        traces.emplace_back(tc_node, std::move(res));
      }
      Output trace(tc_trace);
      trace.stream() << "node,batch,loss\n";
      for (const auto& [v, r] : traces)
        for (std::size_t b = 0; b < r.loss_trace.size(); ++b)
          trace.stream() << v << ',' << b << ',' << detail::fmt_double(r.loss_trace[b]) << '\n';
      trace.finish();
      write_json(tc_c.out, result);
    };
  });

  // query
  Common q_c;
  std::string q_points, q_tree, q_queries, q_clf;
  bool q_check = false;
  auto* q_cmd = add_command(app, "query", "run a query file against a tree", q_c);
  q_cmd->add_option("--points", q_points, "point file")->required();
  q_cmd->add_option("--tree", q_tree, "partition or ring tree json")->required();
  q_cmd->add_option("--queries", q_queries, "query csv")->required();
  q_cmd->add_option("--classifiers", q_clf, "node classifier json (partition trees; enables classifier mode)");
  q_cmd->add_flag("--check", q_check, "compare every result with a linear scan");
  q_cmd->callback([&] {
    action = [&] {
      const auto p = io::load_points(q_points);
      const auto s = io::load_queries(q_queries);
      s.check_dim(p.dim());
      const json tj = load_json(q_tree);
      const std::string kind = json_kind(tj);
      Output out(q_c.out);
      out.stream() << "query,result_size,nodes_visited,time_ns,mode\n";
      std::vector<std::vector<Index>> results, truth;
      auto emit = [&](std::size_t k, std::vector<Index> res, std::size_t visited, std::int64_t ns, const char* mode) {
        out.stream() << k << ',' << res.size() << ',' << visited << ',' << ns << ',' << mode << '\n';
        if (q_check) {
          results.push_back(std::move(res));
          truth.push_back(linear_scan(p, s.queries[k]));
        }
      };
      if (kind == "partition_tree") {
        const auto t = partition_tree_from_json(tj);
        if (t.num_points() != p.size()) throw usage_error("query: tree does not match the point set");
        const PartitionIndex index(t, p);
        std::optional<NodeClassifierSet> clfs;
        if (!q_clf.empty()) clfs = node_classifiers_from_json(load_json(q_clf));
        for (std::size_t k = 0; k < s.size(); ++k) {
          auto rep = clfs ? query_with_classifier(index, s.queries[k], *clfs) : query_exact(index, s.queries[k]);
          emit(k, std::move(rep.result), rep.nodes_visited, rep.wall_time_ns, to_string(rep.mode));
        }
      } else if (kind == "ring_tree") {
        if (!q_clf.empty()) throw usage_error("query: --classifiers applies to partition trees only");
        const auto t = ring_tree_from_json(tj);
        if (t.num_points() != p.size()) throw usage_error("query: tree does not match the point set");
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (s.queries[k].radius != t.search_radius())
            throw usage_error("query: ring trees answer radius " + detail::fmt_double(t.search_radius()) +
                              " only (query " + std::to_string(k) + ")");
          RingQueryStats st;
          const auto t0 = std::chrono::steady_clock::now();
          auto res = query_ring_tree(t, p, s.queries[k].center, &st);
          const auto ns =
              std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
          emit(k, std::move(res), st.nodes_visited, ns, "ring");
        }
      } else {
        throw usage_error("query: unsupported tree kind '" + kind + "'");
      }
      out.finish();
      if (q_check) {
        const auto acc = accuracy_report(results, truth);
        std::fprintf(stderr, "recall=%.6f precision=%.6f\n", acc.recall, acc.precision);
      }
    };
  });

  // bench
  Common b_c;
  std::string b_config, b_report;
  auto* b_cmd = add_command(app, "bench", "run an experiment config over its sample-size ladder and seeds", b_c,
                            false);
  b_cmd->add_option("--config", b_config, "experiment config (key = value)")->required();
  b_cmd->add_option("--report", b_report, "markdown report path (overrides report_out)");
  b_cmd->callback([&] {
    action = [&] {
      auto cfg = load_experiment_config(b_config);
      if (b_cmd->count("--seed")) cfg.seeds = {b_c.seed};
      if (!b_c.out.empty()) cfg.metrics_out = b_c.out;
      if (!b_report.empty()) cfg.report_out = b_report;
      Output metrics(cfg.metrics_out);
      metrics.stream() << kMetricsHeader << '\n';
      const auto rows = run_experiment(cfg, [&](const MetricsRow& r) {
        metrics.stream() << metrics_csv_line(r) << '\n';
        metrics.stream().flush();
      });
      metrics.finish();
      const std::string md = render_report(rows, cfg.name);
      if (cfg.report_out.empty()) {
        std::cerr << md;
      } else {
        auto f = io::detail::open_out(cfg.report_out);
        f << md;
      }
    };
  });

  // report
  Common r_c;
  std::string r_in, r_title = "experiment";
  auto* r_cmd = add_command(app, "report", "render a metrics csv as a markdown table", r_c);
  r_cmd->add_option("--in", r_in, "metrics csv")->required();
  r_cmd->add_option("--title", r_title, "report heading")->capture_default_str();
  r_cmd->callback([&] {
    action = [&] {
      auto f = io::detail::open_in(r_in);
      const auto rows = read_metrics_csv(f);
      Output out(r_c.out);
      out.stream() << render_report(rows, r_title);
      out.finish();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (CLI::App* sub : app.get_subcommands()) {
      const auto* opt = sub->get_option_no_throw("--config");
      if (sub->get_name() != "bench" && opt && opt->count() > 0) apply_option_file(*sub, opt->as<std::string>());
    }
    if (action) action();
    return 0;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
