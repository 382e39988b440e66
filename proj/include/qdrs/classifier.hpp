#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/partition_query.hpp"
#include "qdrs/stab_metrics.hpp"

namespace qdrs {

inline constexpr std::size_t kNumClasses = 3;

inline std::size_t class_index(StabResult s) noexcept { return static_cast<std::size_t>(s); }
inline StabResult class_from_index(std::size_t k) noexcept { return static_cast<StabResult>(k); }

/// Feed-forward net: rectifier hidden layers, softmax output over
/// {empty, stabbed, full}. Weights are row-major [out][in].
struct MLP {
  std::vector<std::size_t> layers;  // {in, h1, ..., 3}
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  MLP() = default;

  MLP(std::vector<std::size_t> sizes, std::uint64_t seed) : layers(std::move(sizes)) {
    detail::require(layers.size() >= 2, "MLP: need at least input and output layers");
    detail::require(layers.back() == kNumClasses, "MLP: output layer must have 3 units");
    for (auto s : layers) detail::require(s > 0, "MLP: empty layer");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      const std::size_t in = layers[l], out = layers[l + 1];
      std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(in)));
      std::vector<double> w(in * out);
      for (double& x : w) x = g(rng);
      weights.push_back(std::move(w));
      biases.emplace_back(out, 0.0);
    }
  }

  std::size_t input_dim() const { return layers.front(); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void validate() const {
    detail::require(layers.size() >= 2 && weights.size() + 1 == layers.size() && biases.size() == weights.size(),
                    "MLP: layer bookkeeping is inconsistent");
    detail::require(layers.back() == kNumClasses, "MLP: output layer must have 3 units");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      detail::require(weights[l].size() == layers[l] * layers[l + 1] && biases[l].size() == layers[l + 1],
                      "MLP: parameter shapes do not chain");
      for (double x : weights[l]) detail::require(std::isfinite(x), "MLP: non-finite weight");
      for (double x : biases[l]) detail::require(std::isfinite(x), "MLP: non-finite bias");
    }
  }

  friend bool operator==(const MLP&, const MLP&) = default;
};

namespace detail {

// activations[l] is the output of layer l (activations[0] = input).
struct ForwardCache {
  std::vector<std::vector<double>> activations;
};

inline void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : z) v /= s;
}

inline void forward(const MLP& net, std::span<const double> x, ForwardCache& cache) {
  cache.activations.resize(net.layers.size());
  cache.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.layers[l], out = net.layers[l + 1];
    const auto& a = cache.activations[l];
    auto& z = cache.activations[l + 1];
    z.assign(net.biases[l].begin(), net.biases[l].end());
    const double* w = net.weights[l].data();
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * a[i];
      z[o] += s;
    }
    if (l + 1 < net.num_layers()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    } else {
      softmax_inplace(z);
    }
  }
}

}  // namespace detail

/// Class probabilities for one (already standardized) feature vector.
inline std::array<double, kNumClasses> predict_proba(const MLP& net, std::span<const double> features) {
  detail::require(features.size() == net.input_dim(), "predict: feature dimension mismatch");
  detail::ForwardCache cache;
  detail::forward(net, features, cache);
  const auto& p = cache.activations.back();
  return {p[0], p[1], p[2]};
}

inline StabResult predict(const MLP& net, std::span<const double> features) {
  const auto p = predict_proba(net, features);
  return class_from_index(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
}

struct Sample {
  std::vector<double> features;
  StabResult label = StabResult::empty;
};

/// Same shapes as the net's parameters.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  explicit Gradients(const MLP& net) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      weights.emplace_back(net.weights[l].size(), 0.0);
      biases.emplace_back(net.biases[l].size(), 0.0);
    }
  }
};

/// Class-weighted mean cross-entropy over `batch`, accumulating its gradient
/// into `grad` (which is zeroed first).
inline double loss_and_gradient(const MLP& net, std::span<const Sample> batch,
                                const std::array<double, kNumClasses>& class_weight, Gradients& grad) {
  for (auto& g : grad.weights) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : grad.biases) std::fill(g.begin(), g.end(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  detail::ForwardCache cache;
  std::vector<double> delta, prev;
  double loss = 0.0;
  for (const auto& s : batch) {
    detail::forward(net, s.features, cache);
    const std::size_t y = class_index(s.label);
    const double w = class_weight[y];
    const auto& p = cache.activations.back();
    loss += -w * std::log(std::max(p[y], 1e-300)) * inv_b;
    delta.assign(p.begin(), p.end());
    delta[y] -= 1.0;
    for (double& d : delta) d *= w * inv_b;
    for (std::size_t l = net.num_layers(); l-- > 0;) {
      const std::size_t in = net.layers[l], out = net.layers[l + 1];
      const auto& a = cache.activations[l];
      auto& gw = grad.weights[l];
      auto& gb = grad.biases[l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * a[i];
      }
      if (l == 0) break;
      prev.assign(in, 0.0);
      const double* wt = net.weights[l].data();
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) prev[i] += wt[o * in + i] * delta[o];
      for (std::size_t i = 0; i < in; ++i)
        if (a[i] <= 0.0) prev[i] = 0.0;
      delta.swap(prev);
    }
  }
  return loss;
}

inline double loss(const MLP& net, std::span<const Sample> batch, const std::array<double, kNumClasses>& class_weight) {
  Gradients g(net);
  return loss_and_gradient(net, batch, class_weight, g);
}

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;         // shuffling
  bool class_reweight = true;
  double plateau_tolerance = 1e-4;
  std::size_t plateau_window = 100;  // batches
};

struct TrainResult {
  std::vector<double> loss_trace;  // one entry per batch
  std::size_t batches = 0;
  bool stopped_early = false;
};

/// Inverse-frequency class weights normalized to mean 1 over present classes.
inline std::array<double, kNumClasses> balanced_class_weights(std::span<const Sample> data) {
  std::array<double, kNumClasses> count{};
  for (const auto& s : data) count[class_index(s.label)] += 1.0;
  std::size_t present = 0;
  for (double c : count) present += c > 0.0 ? 1 : 0;
  std::array<double, kNumClasses> w{};
  for (std::size_t k = 0; k < kNumClasses; ++k)
    w[k] = count[k] > 0.0 ? static_cast<double>(data.size()) / (static_cast<double>(present) * count[k]) : 0.0;
  return w;
}

/// One pass of mini-batch SGD with momentum over a shuffled copy of `data`,
/// stopping early when the windowed mean loss plateaus.
inline TrainResult train(MLP& net, std::span<const Sample> data, const TrainConfig& cfg) {
  net.validate();
  detail::require(!data.empty(), "train: empty training set");
  detail::require(cfg.batch_size >= 1, "train: batch size must be >= 1");
  detail::require(cfg.learning_rate >= 0.0 && cfg.momentum >= 0.0 && cfg.momentum < 1.0, "train: bad SGD parameters");
  for (const auto& s : data) detail::require(s.features.size() == net.input_dim(), "train: feature dimension mismatch");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto class_weight =
      cfg.class_reweight ? balanced_class_weights(data) : std::array<double, kNumClasses>{1.0, 1.0, 1.0};
  Gradients grad(net), velocity(net);
  TrainResult res;
  std::vector<Sample> batch;
  double window_sum = 0.0, prev_window = -1.0;
  for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
    batch.clear();
    for (std::size_t k = start; k < std::min(data.size(), start + cfg.batch_size); ++k) batch.push_back(data[order[k]]);
    const double l = loss_and_gradient(net, batch, class_weight, grad);
    if (!std::isfinite(l))
      throw runtime_failure("train: loss became non-finite at batch " + std::to_string(res.batches));
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
      auto step = [&](std::vector<double>& p, std::vector<double>& v, const std::vector<double>& g) {
        for (std::size_t k = 0; k < p.size(); ++k) {
          v[k] = cfg.momentum * v[k] - cfg.learning_rate * g[k];
          p[k] += v[k];
          if (!std::isfinite(p[k]))
            throw runtime_failure("train: parameter overflow at batch " + std::to_string(res.batches));
        }
      };
      step(net.weights[layer], velocity.weights[layer], grad.weights[layer]);
      step(net.biases[layer], velocity.biases[layer], grad.biases[layer]);
    }
    res.loss_trace.push_back(l);
    ++res.batches;
    window_sum += l;
    if (cfg.plateau_window > 0 && res.batches % cfg.plateau_window == 0) {
      const double mean = window_sum / static_cast<double>(cfg.plateau_window);
      window_sum = 0.0;
      if (prev_window > 0.0 && std::abs(mean - prev_window) / prev_window < cfg.plateau_tolerance) {
        res.stopped_early = true;
        break;
      }
      prev_window = mean;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// accuracy

inline double plain_accuracy(std::span<const StabResult> preds, std::span<const StabResult> labels) {
  detail::require(preds.size() == labels.size(), "plain_accuracy: length mismatch");
  if (preds.empty()) return 1.0;
  std::size_t ok = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) ok += preds[k] == labels[k] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

/// Fraction of decisions that lose no output points: everything except
/// predicting empty on a node that holds points of the range.
inline double context_aware_accuracy(std::span<const StabResult> preds, std::span<const StabResult> labels) {
  detail::require(preds.size() == labels.size(), "context_aware_accuracy: length mismatch");
  if (preds.empty()) return 1.0;
  std::size_t unsafe = 0;
  for (std::size_t k = 0; k < preds.size(); ++k)
    unsafe += (preds[k] == StabResult::empty && labels[k] != StabResult::empty) ? 1 : 0;
  return 1.0 - static_cast<double>(unsafe) / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// range features and training data

/// Raw (center, radius) range features standardized per coordinate.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(std::span<const std::vector<double>> rows) {
    detail::require(!rows.empty(), "Standardizer: no rows");
    const std::size_t d = rows.front().size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& r : rows)
      for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t k = 0; k < d; ++k) s.scale[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
    for (double& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(rows.size()));
      if (!(v > 1e-300)) v = 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) out[k] = (raw[k] - mean[k]) / scale[k];
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline std::vector<double> range_features(const BallRange& q) {
  std::vector<double> f(q.center);
  f.push_back(q.radius);
  return f;
}

/// A range labeled with the exact verdict for the node it was generated for.
struct LabeledRange {
  BallRange range;
  StabResult label = StabResult::empty;
};

/// Centers ~ center_mean + center_sd * N(0, I); radius = |N(radius_loc, radius_sd^2)|.
struct RangeSamplerParams {
  std::vector<double> center_mean;  // empty = origin
  double center_sd = 1.0;
  double radius_loc = 0.0;
  double radius_sd = 4.0;
};

struct TrainingSet {
  std::vector<LabeledRange> ranges;
  std::array<std::size_t, kNumClasses> class_counts{};
};

inline TrainingSet generate_training_set(const PointSet& points, std::span<const Index> node, std::size_t n_samples,
                                         std::uint64_t seed, const RangeSamplerParams& sampler) {
  detail::require(!node.empty(), "generate_training_set: empty node");
  detail::require(sampler.center_sd >= 0.0 && sampler.radius_sd >= 0.0, "generate_training_set: negative spread");
  detail::require(sampler.center_sd > 0.0 || sampler.radius_sd > 0.0,
                  "generate_training_set: degenerate sampler (zero variance)");
  const std::size_t d = points.dim();
  detail::require(sampler.center_mean.empty() || sampler.center_mean.size() == d,
                  "generate_training_set: center_mean dimension mismatch");
  for (Index i : node) detail::require(i < points.size(), "generate_training_set: index out of range");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  TrainingSet out;
  out.ranges.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> c(d);
    for (std::size_t k = 0; k < d; ++k)
      c[k] = (sampler.center_mean.empty() ? 0.0 : sampler.center_mean[k]) + sampler.center_sd * g(rng);
    const double r = std::abs(sampler.radius_loc + sampler.radius_sd * g(rng));
    BallRange q(std::move(c), r);
    const auto label = detail::stabs_unchecked(q, points, node);
    ++out.class_counts[class_index(label)];
    out.ranges.push_back({std::move(q), label});
  }
  return out;
}

/// An MLP together with the feature standardization it was trained under.
struct RangeClassifier {
  Standardizer standardizer;
  MLP net;

  std::vector<double> features(const BallRange& q) const { return standardizer.apply(range_features(q)); }
  StabResult predict(const BallRange& q) const { return qdrs::predict(net, features(q)); }

  friend bool operator==(const RangeClassifier&, const RangeClassifier&) = default;
};

struct ClassifierConfig {
  std::vector<std::size_t> hidden{16, 8};
  std::uint64_t init_seed = 1;
  TrainConfig sgd;
};

inline std::vector<Sample> to_samples(const Standardizer& st, std::span<const LabeledRange> ranges) {
  std::vector<Sample> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) out.push_back({st.apply(range_features(r.range)), r.label});
  return out;
}

/// Standardizes the features, initializes the net and runs one training pass.
inline RangeClassifier fit_range_classifier(std::span<const LabeledRange> data, const ClassifierConfig& cfg,
                                            TrainResult* trace = nullptr) {
  detail::require(!data.empty(), "fit_range_classifier: empty training set");
  std::vector<std::vector<double>> raw;
  raw.reserve(data.size());
  for (const auto& r : data) raw.push_back(range_features(r.range));
  RangeClassifier clf;
  clf.standardizer = Standardizer::fit(raw);
  std::vector<std::size_t> sizes{raw.front().size()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(kNumClasses);
  clf.net = MLP(sizes, cfg.init_seed);
  const auto samples = to_samples(clf.standardizer, data);
  auto res = train(clf.net, samples, cfg.sgd);
  if (trace) *trace = std::move(res);
  return clf;
}

/// One optional classifier per tree node; nodes without one (leaves and nodes
/// below the size threshold) fall back to the exact test.
class NodeClassifierSet : public NodeClassifier {
 public:
  NodeClassifierSet() = default;
  explicit NodeClassifierSet(std::size_t num_nodes) : models_(num_nodes) {}

  std::size_t num_nodes() const override { return models_.size(); }
  std::optional<StabResult> classify(std::size_t node, const BallRange& q) const override {
    const auto& m = models_.at(node);
    if (!m) return std::nullopt;
    return m->predict(q);
  }

  void set(std::size_t node, RangeClassifier clf) { models_.at(node) = std::move(clf); }
  const std::optional<RangeClassifier>& model(std::size_t node) const { return models_.at(node); }
  std::size_t num_models() const {
    return static_cast<std::size_t>(std::count_if(models_.begin(), models_.end(), [](const auto& m) { return m.has_value(); }));
  }

 private:
  std::vector<std::optional<RangeClassifier>> models_;
};

struct NodeTrainingConfig {
  std::size_t min_node_size = 256;
  std::size_t samples_per_node = 20000;
  RangeSamplerParams sampler;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;
};

/// Trains a classifier for every internal node holding at least
/// `min_node_size` points, each with its own derived seed.
inline NodeClassifierSet train_node_classifiers(const PartitionTree& tree, const PointSet& points,
                                                const NodeTrainingConfig& cfg,
                                                std::vector<std::pair<std::size_t, TrainResult>>* traces = nullptr) {
  detail::require(tree.num_points() == points.size(), "train_node_classifiers: tree/point set size mismatch");
  NodeClassifierSet set(tree.num_nodes());
  for (std::size_t v = 0; v < tree.num_nodes(); ++v) {
    const auto& nd = tree.node(v);
    if (nd.is_leaf() || nd.size() < cfg.min_node_size) continue;
    const std::uint64_t node_seed = cfg.seed * 1000003ull + v;
    auto data = generate_training_set(points, tree.points(v), cfg.samples_per_node, node_seed, cfg.sampler);
    ClassifierConfig cc = cfg.classifier;
    cc.init_seed = node_seed ^ 0x5bd1e995ull;
    cc.sgd.seed = node_seed;
    TrainResult res;
    set.set(v, fit_range_classifier(data.ranges, cc, &res));
    if (traces) traces->emplace_back(v, std::move(res));
  }
  return set;
}

}  // namespace qdrs
