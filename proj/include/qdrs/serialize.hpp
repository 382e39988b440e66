#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdrs/classifier.hpp"
#include "qdrs/errors.hpp"
#include "qdrs/io.hpp"
#include "qdrs/ringtree.hpp"
#include "qdrs/stab_metrics.hpp"

namespace qdrs {

using json = nlohmann::json;

namespace detail {

inline constexpr std::size_t kMaxJsonDepth = 4096;

inline void expect_kind(const json& j, const char* kind) {
  if (!j.is_object() || !j.contains("kind") || j.at("kind") != kind)
    throw runtime_failure(std::string("json: expected an object of kind '") + kind + "'");
}

template <class F>
auto json_guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw runtime_failure(std::string(what) + ": malformed json (" + e.what() + ")");
  } catch (const usage_error& e) {
    throw runtime_failure(std::string(what) + ": " + e.what());
  }
}

// Children are numbered in allocation order: both children of a node get
// consecutive ids when the node is expanded, left subtree first.
struct LayoutWriter {
  const PartitionTree& tree;
  const std::vector<std::optional<RingSeparator>>* seps = nullptr;

  json node(std::size_t v, std::size_t depth) const {
    if (depth > kMaxJsonDepth) throw runtime_failure("json: tree too deep to serialize");
    const auto& nd = tree.node(v);
    json j = json::object();
    if (nd.is_leaf()) {
      const auto pts = tree.points(v);
      j["points"] = std::vector<Index>(pts.begin(), pts.end());
      return j;
    }
    if (seps) {
      const auto& s = *(*seps)[v];
      j["center"] = s.center;
      j["r_s"] = s.inner_radius;
    }
    j["left"] = node(static_cast<std::size_t>(nd.left), depth + 1);
    j["right"] = node(static_cast<std::size_t>(nd.right), depth + 1);
    return j;
  }
};

struct LayoutReader {
  std::vector<Index> order;
  std::vector<PartitionTree::Node> nodes;
  std::vector<const json*> source;

  void read(const json& root) {
    nodes.push_back({});
    source.push_back(&root);
    assign(root, 0, 0, 0);
  }

  std::uint32_t assign(const json& j, std::size_t id, std::uint32_t begin, std::size_t depth) {
    if (depth > kMaxJsonDepth) throw runtime_failure("json: tree too deep");
    if (!j.is_object()) throw runtime_failure("json: tree node must be an object");
    const bool has_points = j.contains("points");
    const bool has_children = j.contains("left") || j.contains("right");
    if (has_points == has_children) throw runtime_failure("json: node needs either 'points' or 'left'/'right'");
    if (has_points) {
      const auto pts = j.at("points").get<std::vector<Index>>();
      if (pts.empty()) throw runtime_failure("json: empty leaf");
      order.insert(order.end(), pts.begin(), pts.end());
      const auto end = static_cast<std::uint32_t>(order.size());
      nodes[id] = {begin, end, PartitionTree::kNone, PartitionTree::kNone};
      return end;
    }
    const auto l = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({});
    nodes.push_back({});
    source.push_back(&j.at("left"));
    source.push_back(&j.at("right"));
    const auto mid = assign(j.at("left"), static_cast<std::size_t>(l), begin, depth + 1);
    const auto end = assign(j.at("right"), static_cast<std::size_t>(l + 1), mid, depth + 1);
    nodes[id] = {begin, end, l, l + 1};
    return end;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// trees

inline json to_json(const SpanningPath& path) { return json{{"kind", "spanning_path"}, {"order", path.order}}; }

inline SpanningPath spanning_path_from_json(const json& j) {
  return detail::json_guard("spanning_path", [&] {
    detail::expect_kind(j, "spanning_path");
    SpanningPath p{j.at("order").get<std::vector<Index>>()};
    p.validate();
    return p;
  });
}

inline json to_json(const PartitionTree& tree) {
  return json{{"kind", "partition_tree"},
              {"num_points", tree.num_points()},
              {"root", detail::LayoutWriter{tree}.node(0, 0)}};
}

inline PartitionTree partition_tree_from_json(const json& j) {
  return detail::json_guard("partition_tree", [&] {
    detail::expect_kind(j, "partition_tree");
    detail::LayoutReader rd;
    rd.read(j.at("root"));
    if (rd.order.size() != j.at("num_points").get<std::size_t>())
      throw runtime_failure("partition_tree: num_points does not match the leaves");
    return PartitionTree(std::move(rd.order), std::move(rd.nodes));
  });
}

inline json to_json(const RingTree& tree) {
  std::vector<std::optional<RingSeparator>> seps(tree.num_nodes());
  for (std::size_t v = 0; v < tree.num_nodes(); ++v) seps[v] = tree.separator(v);
  return json{{"kind", "ring_tree"},
              {"r", tree.search_radius()},
              {"leaf_capacity", tree.leaf_capacity()},
              {"num_points", tree.num_points()},
              {"root", detail::LayoutWriter{tree.layout(), &seps}.node(0, 0)}};
}

inline RingTree ring_tree_from_json(const json& j) {
  return detail::json_guard("ring_tree", [&] {
    detail::expect_kind(j, "ring_tree");
    const double r = j.at("r").get<double>();
    detail::LayoutReader rd;
    rd.read(j.at("root"));
    if (rd.order.size() != j.at("num_points").get<std::size_t>())
      throw runtime_failure("ring_tree: num_points does not match the leaves");
    std::vector<std::optional<RingSeparator>> seps(rd.nodes.size());
    for (std::size_t v = 0; v < rd.nodes.size(); ++v) {
      if (rd.nodes[v].is_leaf()) continue;
      const json& n = *rd.source[v];
      seps[v] = RingSeparator(n.at("center").get<std::vector<double>>(), n.at("r_s").get<double>(), r);
    }
    return RingTree(PartitionTree(std::move(rd.order), std::move(rd.nodes)), std::move(seps), r,
                    j.at("leaf_capacity").get<std::size_t>());
  });
}

// ---------------------------------------------------------------------------
// classifiers

inline json to_json(const MLP& net) {
  return json{{"kind", "mlp"}, {"layers", net.layers}, {"weights", net.weights}, {"biases", net.biases}};
}

inline MLP mlp_from_json(const json& j) {
  return detail::json_guard("mlp", [&] {
    detail::expect_kind(j, "mlp");
    MLP net;
    net.layers = j.at("layers").get<std::vector<std::size_t>>();
    net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    net.validate();
    return net;
  });
}

inline json to_json(const RangeClassifier& clf) {
  return json{{"kind", "range_classifier"},
              {"mean", clf.standardizer.mean},
              {"scale", clf.standardizer.scale},
              {"net", to_json(clf.net)}};
}

inline RangeClassifier range_classifier_from_json(const json& j) {
  return detail::json_guard("range_classifier", [&] {
    detail::expect_kind(j, "range_classifier");
    RangeClassifier clf;
    clf.standardizer.mean = j.at("mean").get<std::vector<double>>();
    clf.standardizer.scale = j.at("scale").get<std::vector<double>>();
    clf.net = mlp_from_json(j.at("net"));
    if (clf.standardizer.mean.size() != clf.net.input_dim() || clf.standardizer.scale.size() != clf.net.input_dim())
      throw runtime_failure("range_classifier: standardizer does not match the network input");
    for (double s : clf.standardizer.scale)
      if (!(s > 0.0) || !std::isfinite(s)) throw runtime_failure("range_classifier: scale must be finite and > 0");
    return clf;
  });
}

inline json to_json(const NodeClassifierSet& set) {
  json models = json::array();
  for (std::size_t v = 0; v < set.num_nodes(); ++v)
    if (const auto& m = set.model(v)) models.push_back(json{{"node", v}, {"classifier", to_json(*m)}});
  return json{{"kind", "node_classifiers"}, {"num_nodes", set.num_nodes()}, {"models", std::move(models)}};
}

inline NodeClassifierSet node_classifiers_from_json(const json& j) {
  return detail::json_guard("node_classifiers", [&] {
    detail::expect_kind(j, "node_classifiers");
    NodeClassifierSet set(j.at("num_nodes").get<std::size_t>());
    for (const auto& m : j.at("models")) {
      const auto v = m.at("node").get<std::size_t>();
      if (v >= set.num_nodes()) throw runtime_failure("node_classifiers: node id out of range");
      if (set.model(v)) throw runtime_failure("node_classifiers: duplicate node id");
      set.set(v, range_classifier_from_json(m.at("classifier")));
    }
    return set;
  });
}

// ---------------------------------------------------------------------------
// files

inline std::string json_kind(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) throw runtime_failure("json: missing 'kind'");
  return j.at("kind").get<std::string>();
}

inline json load_json(const std::string& path) {
  auto f = io::detail::open_in(path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw runtime_failure("'" + path + "': " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  auto f = io::detail::open_out(path);
  f << j.dump() << '\n';
  if (!f) throw runtime_failure("write to '" + path + "' failed");
}

}  // namespace qdrs
