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

#ifndef SNV_METRICS_HPP
#define SNV_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "snv/error.hpp"
#include "snv/mask.hpp"
#include "snv/network.hpp"

namespace snv {

/// r(i, j): accuracy on task j after training task i (0-based). Cells with
/// j > i are missing (NaN).
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t n_tasks)
      : n_(n_tasks), cells_(n_tasks * n_tasks, std::numeric_limits<double>::quiet_NaN()) {}

  std::size_t n_tasks() const noexcept { return n_; }

  double at(std::size_t i, std::size_t j) const { return cells_.at(i * n_ + j); }

  void set(std::size_t i, std::size_t j, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("accuracy must lie in [0, 1]");
    cells_.at(i * n_ + j) = v;
  }

  bool present(std::size_t i, std::size_t j) const { return !std::isnan(at(i, j)); }

  bool row_complete(std::size_t i) const {
    for (std::size_t j = 0; j <= i && j < n_; ++j)
      if (!present(i, j)) return false;
    return true;
  }

  friend bool operator==(const AccuracyMatrix& a, const AccuracyMatrix& b) {
    if (a.n_ != b.n_) return false;
    for (std::size_t k = 0; k < a.cells_.size(); ++k) {
      const bool na = std::isnan(a.cells_[k]), nb = std::isnan(b.cells_[k]);
      if (na != nb || (!na && a.cells_[k] != b.cells_[k])) return false;
    }
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> cells_;
};

/// Mean of the final row.
inline double acc(const AccuracyMatrix& r) {
  const std::size_t t = r.n_tasks();
  if (t == 0 || !r.row_complete(t - 1))
    throw UndefinedMetric("ACC needs a complete final row");
  double s = 0.0;
  for (std::size_t j = 0; j < t; ++j) s += r.at(t - 1, j);
  return s / static_cast<double>(t);
}

/// Mean of r(T, j) - r(j, j) over the first T-1 tasks, as a fraction.
inline double bwt(const AccuracyMatrix& r) {
  const std::size_t t = r.n_tasks();
  if (t < 2) throw UndefinedMetric("BWT is undefined for a single task");
  if (!r.row_complete(t - 1)) throw UndefinedMetric("BWT needs a complete final row");
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < t; ++j) {
    if (!r.present(j, j)) throw UndefinedMetric("BWT needs every diagonal entry");
    s += r.at(t - 1, j) - r.at(j, j);
  }
  return s / static_cast<double>(t - 1);
}

/// Percentage of all network parameters owned by neurons in the union of
/// the task masks (incoming rows and biases; the output layer owns none).
inline double cap(const std::vector<TaskMask>& masks, const DenseNet& net) {
  if (masks.empty()) throw PreconditionError("cap: no task masks");
  CumulativeMask all(net.n_neurons());
  for (const auto& m : masks) all = union_mask(all, m);
  std::size_t owned = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all.bits[i]) owned += net.layer(net.neuron_id(i).layer).in() + 1;
  return 100.0 * static_cast<double>(owned) / static_cast<double>(net.param_count());
}

/// |a and b| / |a or b|.
inline double jaccard(const TaskMask& a, const TaskMask& b) {
  if (a.size() != b.size()) throw ShapeError("jaccard: length mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  if (uni == 0) throw UndefinedMetric("jaccard: both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::vector<std::vector<double>> jaccard_matrix(const std::vector<TaskMask>& masks) {
  std::vector<std::vector<double>> out(masks.size(), std::vector<double>(masks.size()));
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (std::size_t j = 0; j < masks.size(); ++j) out[i][j] = jaccard(masks[i], masks[j]);
  return out;
}

/// Neurons in pruning order: ascending phi, ties broken by lower index.
inline std::vector<std::size_t> pruning_order(const std::vector<double>& phi) {
  std::vector<std::size_t> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return phi[a] < phi[b]; });
  return order;
}

/// For each fraction f, mean-ablates the floor(f N) lowest-valued neurons
/// and records the all-class accuracy on `eval`.
inline std::vector<std::pair<double, double>> pruning_curve(const DenseNet& net,
                                                            const std::vector<double>& phi,
                                                            const LabeledBatch& eval,
                                                            const std::vector<double>& means,
                                                            const std::vector<double>& fractions) {
  const std::size_t n = net.n_neurons();
  if (phi.size() != n) throw PreconditionError("pruning_curve: phi length differs from neuron count");
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    throw PreconditionError("pruning_curve: fractions must be sorted ascending");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw PreconditionError("pruning_curve: fractions must lie in [0, 1]");
  const auto game = performance_oracle(net, eval, means);
  const auto order = pruning_order(phi);
  std::vector<std::pair<double, double>> curve;
  for (double f : fractions) {
    Coalition keep = Coalition::full(n);
    const std::size_t pruned = budget_k(f, n);
    for (std::size_t r = 0; r < pruned; ++r) keep.erase(order[r]);
    curve.emplace_back(f, game.value(keep));
  }
  return curve;
}

}  // namespace snv

#endif  // SNV_METRICS_HPP
