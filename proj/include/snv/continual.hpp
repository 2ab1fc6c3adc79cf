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

#ifndef SNV_CONTINUAL_HPP
#define SNV_CONTINUAL_HPP

#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "snv/estimator.hpp"
#include "snv/mask.hpp"
#include "snv/metrics.hpp"
#include "snv/network.hpp"
#include "snv/parallel.hpp"
#include "snv/rng.hpp"
#include "snv/tasks.hpp"

namespace snv {

/// Parameter-level mask in flat parameter order; 0 = frozen.
struct FreezeMask {
  Bits entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool frozen(std::size_t flat) const { return entries.at(flat) == 0; }
  std::size_t frozen_count() const { return entries.size() - popcount(entries); }
};

/// Freezes the incoming rows of every neuron in `b` and the output rows
/// (weights and bias) of every finalized class partition.
inline FreezeMask build_freeze_mask(const CumulativeMask& b, const DenseNet& net,
                                    const std::vector<ClassRange>& finalized = {}) {
  if (b.size() != net.n_neurons()) throw ShapeError("build_freeze_mask: mask length differs from N");
  FreezeMask m{Bits(net.param_count(), 1)};
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.bits[i]) continue;
    for (const auto& p : neuron_params(net, i)) m.entries[net.flat_index(p)] = 0;
  }
  const std::size_t out_layer = net.n_layers() - 1;
  const std::size_t in = net.output_layer().in();
  for (const auto& range : finalized) {
    if (range.end > net.output_dim()) throw ShapeError("finalized partition outside the output layer");
    for (std::size_t row = range.begin; row < range.end; ++row) {
      for (std::size_t c = 0; c < in; ++c) m.entries[net.flat_index({out_layer, row, c})] = 0;
      m.entries[net.flat_index({out_layer, row, std::nullopt})] = 0;
    }
  }
  return m;
}

/// theta_j -= lr * g_j for unfrozen j. Frozen entries are never written.
inline void masked_update(std::vector<double>& params, const std::vector<double>& gradient,
                          const FreezeMask& m, double lr) {
  if (params.size() != gradient.size() || params.size() != m.size())
    throw ShapeError("masked_update: parameter, gradient and mask sizes differ");
  if (!(lr > 0.0)) throw PreconditionError("masked_update: learning rate must be positive");
  for (std::size_t j = 0; j < params.size(); ++j)
    if (m.entries[j]) params[j] -= lr * gradient[j];
}

inline void masked_update(DenseNet& net, const Gradient& g, const FreezeMask& m, double lr) {
  auto params = net.flat_params();
  masked_update(params, flat_gradient(g), m, lr);
  net.set_flat_params(params);
}

/// True when every frozen entry of `m` is bit-identical in a and b.
inline bool frozen_bits_equal(const std::vector<double>& a, const std::vector<double>& b,
                              const FreezeMask& m) {
  if (a.size() != b.size() || a.size() != m.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j)
    if (m.frozen(j) && std::bit_cast<std::uint64_t>(a[j]) != std::bit_cast<std::uint64_t>(b[j]))
      return false;
  return true;
}

struct TrainerConfig {
  double lr = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::size_t patience = 10;
  double momentum = 0.0;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("trainer.lr must be > 0");
    if (epochs == 0) throw ConfigError("trainer.epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("trainer.batch_size must be >= 1");
    if (patience == 0) throw ConfigError("trainer.patience must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("trainer.momentum must lie in [0, 1)");
  }
};

struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 if no epoch improved
};

/// Minibatch SGD on one task's logit partition with the freeze mask applied
/// to every step. Stops when the validation loss has not improved for
/// `patience` epochs and restores the best epoch's parameters.
inline TrainTrace train_task(DenseNet& net, const TaskSpec& task, const FreezeMask& freeze,
                             const TrainerConfig& cfg, std::uint64_t shuffle_seed) {
  cfg.validate();
  if (task.train.empty() || task.val.empty()) throw DataError(fmt::format("task {} has an empty split", task.task_id));
  if (freeze.size() != net.param_count()) throw ShapeError("train_task: freeze mask does not match the network");
  const LabeledBatch train = to_batch(task.train);
  const LabeledBatch val = to_batch(task.val);
  const ClassRange part = task.classes;

  CounterRng rng(shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> params = net.flat_params();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  TrainTrace trace;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      LabeledBatch mb;
      mb.inputs.resize(train.inputs.rows(), static_cast<Eigen::Index>(stop - start));
      for (std::size_t k = start; k < stop; ++k) {
        mb.inputs.col(static_cast<Eigen::Index>(k - start)) = train.inputs.col(static_cast<Eigen::Index>(order[k]));
        mb.labels.push_back(train.labels[order[k]]);
      }
      const auto g = flat_gradient(grad(net, mb, part));
      if (cfg.momentum > 0.0) {
        for (std::size_t j = 0; j < g.size(); ++j)
          if (freeze.entries[j]) velocity[j] = cfg.momentum * velocity[j] + g[j];
        masked_update(params, velocity, freeze, cfg.lr);
      } else {
        masked_update(params, g, freeze, cfg.lr);
      }
      net.set_flat_params(params);
    }
    trace.train_loss.push_back(loss(net, train, part));
    const double v = loss(net, val, part);
    trace.val_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best = params;
      trace.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (trace.best_epoch > 0) net.set_flat_params(best);
  return trace;
}

/// Everything needed to replay task t's function exactly after later tasks.
struct TaskSnapshot {
  int task_id = 0;
  CumulativeMask cumulative;
  std::vector<double> means;
  ClassRange partition;
  DenseLayer head;  // output rows of `partition`
};

inline TaskSnapshot take_snapshot(const DenseNet& net, int task_id, const CumulativeMask& b,
                                  std::vector<double> means, ClassRange partition) {
  TaskSnapshot s{task_id, b, std::move(means), partition, {}};
  const auto& out = net.output_layer();
  s.head.weights = out.weights.middleRows(static_cast<Eigen::Index>(partition.begin),
                                          static_cast<Eigen::Index>(partition.size()));
  s.head.bias = out.bias.segment(static_cast<Eigen::Index>(partition.begin),
                                 static_cast<Eigen::Index>(partition.size()));
  return s;
}

/// Task-aware prediction: the live network with every neuron outside the
/// snapshot's cumulative mask replaced by its mean at freeze time, the
/// stored head substituted, and argmax over the task's partition.
inline std::vector<std::size_t> til_inference(const DenseNet& net,
                                              const std::vector<TaskSnapshot>& snapshots, int task_id,
                                              const Eigen::MatrixXd& inputs) {
  const TaskSnapshot* snap = nullptr;
  for (const auto& s : snapshots)
    if (s.task_id == task_id) snap = &s;
  if (!snap) throw PreconditionError(fmt::format("no snapshot stored for task {}", task_id));
  DenseNet replay = net;
  auto& out = replay.layers().back();
  out.weights.middleRows(static_cast<Eigen::Index>(snap->partition.begin),
                         static_cast<Eigen::Index>(snap->partition.size())) = snap->head.weights;
  out.bias.segment(static_cast<Eigen::Index>(snap->partition.begin),
                   static_cast<Eigen::Index>(snap->partition.size())) = snap->head.bias;
  const AblationSpec spec{Coalition::from_bits(snap->cumulative.bits), snap->means};
  return predict(replay, inputs, &spec, snap->partition);
}

/// Task-agnostic prediction over every class of the live network.
inline std::vector<std::size_t> cil_inference(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  return predict(net, inputs);
}

enum class Method { snv, naive };
enum class TilMode { snapshot, live };

struct ContinualConfig {
  EstimatorConfig estimator;
  TrainerConfig trainer;
  std::vector<std::size_t> hidden{32};
  Method method = Method::snv;
  TilMode til_mode = TilMode::snapshot;
  std::uint64_t seed = 0;
};

struct RunResult {
  DenseNet net;
  AccuracyMatrix r_til;
  AccuracyMatrix r_cil;
  std::vector<TaskMask> masks;
  CumulativeMask cumulative;
  std::vector<TaskSnapshot> snapshots;
  std::vector<EstimateReport> reports;
  std::vector<TrainTrace> traces;
  std::vector<DenseNet> checkpoints;  // network after each task
  std::vector<double> seconds;        // wall time per task
  std::vector<std::string> warnings;
};

/// Sequential training with Shapley-valued neuron freezing.
///
/// For each task: freeze B_{t-1} and the finished heads, train, record
/// means and value neurons on the task's validation split, select S_t,
/// grow B_t, snapshot, and fill row t of both accuracy matrices.
inline RunResult run_sequence(const std::vector<TaskSpec>& tasks, const ContinualConfig& cfg,
                              WorkerPool* pool = nullptr) {
  if (tasks.empty()) throw PreconditionError("run_sequence: no tasks");
  cfg.trainer.validate();
  if (cfg.method == Method::snv) cfg.estimator.validate();
  const std::size_t n_tasks = tasks.size();
  const std::size_t input_dim = tasks.front().train.at(0).x.size();
  std::size_t output_dim = 0;
  for (const auto& t : tasks) output_dim = std::max(output_dim, t.classes.end);

  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(output_dim);

  RunResult res;
  res.net = DenseNet::he_init(sizes, derive_seed(cfg.seed, "init"));
  const std::size_t n = res.net.n_neurons();
  res.r_til = AccuracyMatrix(n_tasks);
  res.r_cil = AccuracyMatrix(n_tasks);
  res.cumulative = CumulativeMask(n);
  std::vector<ClassRange> finalized;
  std::vector<LabeledBatch> tests;
  for (const auto& t : tasks) tests.push_back(to_batch(t.test));

  for (std::size_t ti = 0; ti < n_tasks; ++ti) {
    const auto started = std::chrono::steady_clock::now();
    const TaskSpec& task = tasks[ti];
    const bool snv = cfg.method == Method::snv;
    if (snv && res.cumulative.all())
      res.warnings.push_back(fmt::format(
          "capacity exhausted before task {}: every neuron is frozen, only the head trains",
          task.task_id));

    const FreezeMask freeze = snv ? build_freeze_mask(res.cumulative, res.net, finalized)
                                  : FreezeMask{Bits(res.net.param_count(), 1)};
    const auto before = res.net.flat_params();
    res.traces.push_back(
        train_task(res.net, task, freeze, cfg.trainer, derive_seed(cfg.seed, "shuffle", ti)));
    if (!frozen_bits_equal(before, res.net.flat_params(), freeze))
      throw std::logic_error(fmt::format("frozen parameters changed during task {}", task.task_id));

    if (snv) {
      const LabeledBatch val = to_batch(task.val);
      auto means = record_means(res.net, val.inputs);
      const auto game = performance_oracle(res.net, val, means, task.classes);
      EstimatorConfig ecfg = cfg.estimator;
      ecfg.seed = derive_seed(cfg.seed, "permutations", ti);
      auto report = estimate_snv(game, ecfg, pool);
      report.mask.task_id = task.task_id;
      res.masks.push_back(report.mask);
      res.cumulative = union_mask(res.cumulative, report.mask);
      res.snapshots.push_back(
          take_snapshot(res.net, task.task_id, res.cumulative, std::move(means), task.classes));
      res.reports.push_back(std::move(report));
      finalized.push_back(task.classes);
    }

    for (std::size_t k = 0; k <= ti; ++k) {
      const auto& test = tests[k];
      const auto& part = tasks[k].classes;
      const auto til = (snv && cfg.til_mode == TilMode::snapshot)
                           ? til_inference(res.net, res.snapshots, tasks[k].task_id, test.inputs)
                           : predict(res.net, test.inputs, nullptr, part);
      res.r_til.set(ti, k, accuracy(til, test.labels));
      res.r_cil.set(ti, k, accuracy(cil_inference(res.net, test.inputs), test.labels));
    }
    res.checkpoints.push_back(res.net);
    res.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }
  return res;
}

}  // namespace snv

#endif  // SNV_CONTINUAL_HPP
