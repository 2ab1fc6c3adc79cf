// Copyright 2026 The SNV Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SNV_NETWORK_HPP
#define SNV_NETWORK_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "snv/coalition.hpp"
#include "snv/error.hpp"
#include "snv/game.hpp"
#include "snv/rng.hpp"

namespace snv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Half-open range [begin, end) of global class ids (a task's logit slice).
struct ClassRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t c) const noexcept { return c >= begin && c < end; }
  friend bool operator==(const ClassRange&, const ClassRange&) = default;
};

/// Inputs stored column-wise (input_dim x n) with one label per column.
struct LabeledBatch {
  Eigen::MatrixXd inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct DenseLayer {
  RowMatrix weights;  // out x in
  Eigen::VectorXd bias;

  std::size_t in() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t param_count() const noexcept { return out() * in() + out(); }
};

/// Hidden unit `unit` of hidden layer `layer`.
struct NeuronId {
  std::size_t layer = 0;
  std::size_t unit = 0;
  friend bool operator==(const NeuronId&, const NeuronId&) = default;
};

/// A weight (layer, row, col) or, when col is empty, a bias (layer, row).
struct ParamIndex {
  std::size_t layer = 0;
  std::size_t row = 0;
  std::optional<std::size_t> col;
  friend bool operator==(const ParamIndex&, const ParamIndex&) = default;
};

/// Post-activation mean ablation: hidden neuron i with keep bit 0 emits
/// means[i] regardless of the input.
struct AblationSpec {
  Coalition keep;
  std::vector<double> means;
};

/// Feed-forward ReLU network. Every layer but the last is hidden; hidden
/// units are the players (neurons), numbered layer by layer.
/// Flat parameter order: per layer, row-major weights then bias.
class DenseNet {
 public:
  DenseNet() = default;

  /// sizes = {input, hidden..., output}; parameters start at zero.
  explicit DenseNet(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw ShapeError("DenseNet needs at least input and output sizes");
    for (auto s : sizes)
      if (s == 0) throw ShapeError("DenseNet layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer layer;
      layer.weights = RowMatrix::Zero(static_cast<Eigen::Index>(sizes[l + 1]),
                                      static_cast<Eigen::Index>(sizes[l]));
      layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1]));
      layers_.push_back(std::move(layer));
    }
    index();
  }

  /// He initialisation: weights ~ N(0, 2 / fan_in), zero biases.
  static DenseNet he_init(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    DenseNet net(sizes);
    CounterRng rng(seed);
    for (auto& layer : net.layers_) {
      const double scale = std::sqrt(2.0 / static_cast<double>(layer.in()));
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = scale * rng.normal();
    }
    return net;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().in());
    for (const auto& l : layers_) s.push_back(l.out());
    return s;
  }

  std::size_t input_dim() const { return layers_.front().in(); }
  std::size_t output_dim() const { return layers_.back().out(); }
  std::size_t n_layers() const noexcept { return layers_.size(); }
  std::size_t n_hidden_layers() const noexcept { return layers_.size() - 1; }
  std::size_t n_neurons() const noexcept { return neuron_ids_.size(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const DenseLayer& layer(std::size_t l) const { return layers_.at(l); }
  DenseLayer& layer(std::size_t l) { return layers_.at(l); }
  const DenseLayer& output_layer() const { return layers_.back(); }

  NeuronId neuron_id(std::size_t i) const {
    if (i >= neuron_ids_.size())
      throw PreconditionError(fmt::format("neuron index {} out of range (N = {})", i,
                                          neuron_ids_.size()));
    return neuron_ids_[i];
  }

  std::size_t neuron_index(NeuronId id) const {
    if (id.layer >= n_hidden_layers() || id.unit >= layers_[id.layer].out())
      throw PreconditionError("neuron id out of range");
    return hidden_offset_[id.layer] + id.unit;
  }

  /// First flat neuron index of hidden layer l.
  std::size_t hidden_offset(std::size_t l) const { return hidden_offset_.at(l); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
  }

  std::size_t hidden_param_count() const { return param_count() - output_layer().param_count(); }

  /// Flat offset of the first parameter of layer l.
  std::size_t param_offset(std::size_t l) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < l; ++k) n += layers_[k].param_count();
    return n;
  }

  std::size_t flat_index(const ParamIndex& p) const {
    if (p.layer >= layers_.size()) throw PreconditionError("parameter layer out of range");
    const auto& layer = layers_[p.layer];
    if (p.row >= layer.out() || (p.col && *p.col >= layer.in()))
      throw PreconditionError("parameter index out of range");
    const std::size_t base = param_offset(p.layer);
    return p.col ? base + p.row * layer.in() + *p.col
                 : base + layer.out() * layer.in() + p.row;
  }

  std::vector<double> flat_params() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  void set_flat_params(const std::vector<double>& flat) {
    if (flat.size() != param_count()) throw ShapeError("set_flat_params: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.weights.size(), l.weights.data());
      k += static_cast<std::size_t>(l.weights.size());
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
      k += static_cast<std::size_t>(l.bias.size());
    }
  }

  /// Logits for a batch (input_dim x n), optionally mean-ablated.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, const AblationSpec* ablation = nullptr,
                                std::vector<Eigen::MatrixXd>* hidden = nullptr) const {
    if (static_cast<std::size_t>(x.rows()) != input_dim())
      throw ShapeError(fmt::format("input has dimension {}, network expects {}", x.rows(),
                                   input_dim()));
    if (ablation) check_ablation(*ablation);
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Eigen::MatrixXd z = layer.weights * a;
      z.colwise() += layer.bias;
      if (l + 1 == layers_.size()) return z;
      a = z.cwiseMax(0.0);
      if (ablation) {
        for (std::size_t u = 0; u < layer.out(); ++u) {
          const std::size_t i = hidden_offset_[l] + u;
          if (!ablation->keep.contains(i)) a.row(static_cast<Eigen::Index>(u)).setConstant(ablation->means[i]);
        }
      }
      if (hidden) hidden->push_back(a);
    }
    return a;  // unreachable: at least one layer
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x, const AblationSpec* ablation = nullptr) const {
    return forward_batch(x, ablation).col(0);
  }

 private:
  void index() {
    neuron_ids_.clear();
    hidden_offset_.clear();
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      hidden_offset_.push_back(neuron_ids_.size());
      for (std::size_t u = 0; u < layers_[l].out(); ++u) neuron_ids_.push_back({l, u});
    }
  }

  void check_ablation(const AblationSpec& a) const {
    if (a.keep.n_players() != n_neurons() || a.means.size() != n_neurons())
      throw ShapeError(fmt::format("ablation spec sized for {} neurons, network has {}",
                                   a.means.size(), n_neurons()));
  }

  friend DenseNet densenet_from_json(const nlohmann::json& j);

  std::vector<DenseLayer> layers_;
  std::vector<NeuronId> neuron_ids_;
  std::vector<std::size_t> hidden_offset_;
};

/// Lowest index among the maximal entries of v[range].
inline std::size_t argmax_in(const Eigen::Ref<const Eigen::VectorXd>& v, ClassRange range) {
  std::size_t best = range.begin;
  for (std::size_t c = range.begin + 1; c < range.end; ++c)
    if (v(static_cast<Eigen::Index>(c)) > v(static_cast<Eigen::Index>(best))) best = c;
  return best;
}

/// Mean post-activation of every hidden neuron over `inputs` (no ablation).
inline std::vector<double> record_means(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) throw PreconditionError("record_means: no data");
  std::vector<Eigen::MatrixXd> hidden;
  net.forward_batch(inputs, nullptr, &hidden);
  std::vector<double> means;
  means.reserve(net.n_neurons());
  for (const auto& a : hidden)
    for (Eigen::Index u = 0; u < a.rows(); ++u) means.push_back(a.row(u).mean());
  return means;
}

/// Gradient of the mean softmax cross-entropy, congruent to the layers.
struct Gradient {
  std::vector<DenseLayer> layers;
  double loss = 0.0;
};

inline ClassRange full_range(const DenseNet& net) { return {0, net.output_dim()}; }

/// Mean softmax cross-entropy over `partition` (all logits by default).
inline double loss(const DenseNet& net, const LabeledBatch& batch,
                   std::optional<ClassRange> partition = std::nullopt) {
  const ClassRange r = partition.value_or(full_range(net));
  const Eigen::MatrixXd logits = net.forward_batch(batch.inputs);
  double total = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto col = logits.col(static_cast<Eigen::Index>(j))
                         .segment(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size()));
    const double m = col.maxCoeff();
    const double lse = m + std::log((col.array() - m).exp().sum());
    total += lse - col(static_cast<Eigen::Index>(batch.labels[j] - r.begin));
  }
  return total / static_cast<double>(batch.size());
}

/// Backpropagated gradient of the mean cross-entropy. With a partition the
/// softmax runs over that logit slice only, so the other output rows get a
/// zero gradient.
inline Gradient grad(const DenseNet& net, const LabeledBatch& batch,
                     std::optional<ClassRange> partition = std::nullopt) {
  const ClassRange r = partition.value_or(full_range(net));
  if (r.begin >= r.end || r.end > net.output_dim())
    throw DataError("grad: class partition outside the output layer");
  if (batch.size() == 0) throw DataError("grad: empty batch");
  if (static_cast<std::size_t>(batch.inputs.cols()) != batch.size())
    throw ShapeError("grad: inputs and labels disagree in count");
  for (auto y : batch.labels)
    if (!r.contains(y))
      throw DataError(fmt::format("grad: label {} outside classes [{}, {})", y, r.begin, r.end));

  const auto& layers = net.layers();
  const std::size_t n_layers = layers.size();
  std::vector<Eigen::MatrixXd> acts{batch.inputs};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = layers[l].weights * acts.back();
    z.colwise() += layers[l].bias;
    pre.push_back(z);
    if (l + 1 < n_layers) acts.push_back(z.cwiseMax(0.0));
  }

  const auto b = static_cast<double>(batch.size());
  const auto& logits = pre.back();
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  double total = 0.0;
  const auto rb = static_cast<Eigen::Index>(r.begin);
  const auto rn = static_cast<Eigen::Index>(r.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Eigen::VectorXd col = logits.col(j).segment(rb, rn);
    const double m = col.maxCoeff();
    const Eigen::ArrayXd e = (col.array() - m).exp();
    const double s = e.sum();
    const auto y = static_cast<Eigen::Index>(batch.labels[static_cast<std::size_t>(j)] - r.begin);
    total += m + std::log(s) - col(y);
    Eigen::VectorXd p = (e / s).matrix();
    p(y) -= 1.0;
    dz.col(j).segment(rb, rn) = p / b;
  }

  Gradient g;
  g.loss = total / b;
  g.layers.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    g.layers[l].weights = dz * acts[l].transpose();
    g.layers[l].bias = dz.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = layers[l].weights.transpose() * dz;
    dz = da.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

inline std::vector<double> flat_gradient(const Gradient& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

/// Incoming weight row and bias of hidden neuron i. Outgoing weights belong
/// to the downstream units.
inline std::vector<ParamIndex> neuron_params(const DenseNet& net, std::size_t i) {
  const NeuronId id = net.neuron_id(i);
  const auto& layer = net.layer(id.layer);
  std::vector<ParamIndex> out;
  out.reserve(layer.in() + 1);
  for (std::size_t c = 0; c < layer.in(); ++c) out.push_back({id.layer, id.unit, c});
  out.push_back({id.layer, id.unit, std::nullopt});
  return out;
}

/// Predicted global class per column; argmax restricted to `partition`.
inline std::vector<std::size_t> predict(const DenseNet& net, const Eigen::MatrixXd& inputs,
                                        const AblationSpec* ablation = nullptr,
                                        std::optional<ClassRange> partition = std::nullopt) {
  const ClassRange r = partition.value_or(full_range(net));
  const Eigen::MatrixXd logits = net.forward_batch(inputs, ablation);
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out[static_cast<std::size_t>(j)] = argmax_in(logits.col(j), r);
  return out;
}

inline double accuracy(const std::vector<std::size_t>& predicted,
                       const std::vector<std::size_t>& labels) {
  if (labels.empty()) throw DataError("accuracy: empty evaluation set");
  std::size_t hit = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) hit += predicted[j] == labels[j] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// V(S): accuracy on `eval` with every neuron outside S replaced by its
/// mean. The network is copied; nothing is retrained.
inline CooperativeGame performance_oracle(const DenseNet& net, const LabeledBatch& eval,
                                          std::vector<double> means,
                                          std::optional<ClassRange> partition = std::nullopt) {
  if (eval.size() == 0) throw PreconditionError("performance_oracle: empty evaluation set");
  if (means.size() != net.n_neurons())
    throw PreconditionError("performance_oracle: means length differs from neuron count");
  auto frozen = std::make_shared<const DenseNet>(net);
  auto data = std::make_shared<const LabeledBatch>(eval);
  auto mu = std::make_shared<const std::vector<double>>(std::move(means));
  return CooperativeGame(net.n_neurons(), [frozen, data, mu, partition](const Coalition& s) {
    const AblationSpec spec{s, *mu};
    return accuracy(predict(*frozen, data->inputs, &spec, partition), data->labels);
  });
}

/// Checkpoint document: layer shapes, row-major weights, biases and the
/// neuron index map.
inline nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json j;
  j["format"] = "snv.densenet";
  j["version"] = 1;
  j["sizes"] = net.sizes();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"weights", std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size())},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  auto& map = j["neuron_index_map"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.n_neurons(); ++i) {
    const auto id = net.neuron_id(i);
    map.push_back({id.layer, id.unit});
  }
  return j;
}

inline DenseNet densenet_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "snv.densenet" || j.at("version") != 1)
      throw DataError("unsupported checkpoint format");
    DenseNet net(j.at("sizes").get<std::vector<std::size_t>>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.n_layers()) throw DataError("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      auto w = layers[l].at("weights").get<std::vector<double>>();
      auto b = layers[l].at("bias").get<std::vector<double>>();
      auto& layer = net.layers_[l];
      if (w.size() != static_cast<std::size_t>(layer.weights.size()) ||
          b.size() != static_cast<std::size_t>(layer.bias.size()))
        throw DataError(fmt::format("checkpoint layer {} has the wrong shape", l));
      std::copy(w.begin(), w.end(), layer.weights.data());
      std::copy(b.begin(), b.end(), layer.bias.data());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace snv

#endif  // SNV_NETWORK_HPP
