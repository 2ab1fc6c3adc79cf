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

#ifndef SNV_ESTIMATOR_HPP
#define SNV_ESTIMATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "snv/coalition.hpp"
#include "snv/error.hpp"
#include "snv/game.hpp"
#include "snv/mask.hpp"
#include "snv/parallel.hpp"
#include "snv/rng.hpp"
#include "snv/stats.hpp"

namespace snv {

struct EstimatorConfig {
  double capacity_ratio = 0.1;  ///< c: fraction of players kept per task
  /// tau: marginals are only sampled while V(S) > tau. -inf disables it.
  double truncation_threshold = 0.05;
  double confidence = 0.95;  ///< alpha for the racing intervals
  std::size_t min_samples = 5;
  std::size_t max_permutations = 10000;
  std::uint64_t seed = 0;
  /// When false every player stays active for all passes (plain Monte Carlo).
  bool racing = true;

  void validate() const {
    if (!(capacity_ratio > 0.0 && capacity_ratio < 1.0))
      throw ConfigError("estimator.capacity_ratio must lie in (0, 1)");
    if (!(confidence > 0.0 && confidence < 1.0))
      throw ConfigError("estimator.confidence must lie in (0, 1)");
    if (min_samples < 2) throw ConfigError("estimator.min_samples must be >= 2");
    if (max_permutations < 1) throw ConfigError("estimator.max_permutations must be >= 1");
    if (std::isnan(truncation_threshold))
      throw ConfigError("estimator.truncation_threshold must not be NaN");
  }
};

struct EstimateReport {
  std::vector<double> phi_hat;
  std::vector<std::size_t> counts;
  std::vector<double> sigma;       ///< NaN below two samples
  std::vector<double> half_width;  ///< final delta_i; +inf below min_samples
  TaskMask mask;
  std::size_t permutations_used = 0;
  std::size_t truncated_skips = 0;
  bool converged = false;
  EstimatorConfig config;
};

/// One Monte Carlo pass over a uniformly drawn ordering.
///
/// Walks the ordering growing S; for each player i in `active` with
/// V(S) > tau, folds V(S + i) - V(S) into `acc`. Skipped players record no
/// sample. Returns the number of active players skipped by truncation.
/// Prefix values are evaluated on `pool` (if given) and then applied in
/// ordering order, so results do not depend on the worker count.
inline std::size_t sample_permutation_pass(const CooperativeGame& game, ShapleyAccumulator& acc,
                                           const Bits& active, double tau, CounterRng& rng,
                                           WorkerPool* pool = nullptr) {
  const std::size_t n = game.n_players();
  if (acc.size() != n || active.size() != n)
    throw PreconditionError("sample_permutation_pass: accumulator/active size mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span<std::size_t>(order), rng);

  // prefixes[j] = first j players of the ordering
  std::vector<Coalition> prefixes;
  prefixes.reserve(n + 1);
  prefixes.emplace_back(n);
  for (std::size_t j = 0; j < n; ++j) prefixes.push_back(prefixes.back().with(order[j]));

  std::vector<double> values(n + 1, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> known(n + 1, 0);
  auto evaluate = [&](const std::vector<std::size_t>& which) {
    auto body = [&](std::size_t w) { values[which[w]] = game.value(prefixes[which[w]]); };
    if (pool) {
      pool->parallel_for(which.size(), body);
    } else {
      for (std::size_t w = 0; w < which.size(); ++w) body(w);
    }
    for (auto j : which) known[j] = 1;
  };

  std::vector<std::size_t> first;
  for (std::size_t j = 0; j < n; ++j)
    if (active[order[j]]) first.push_back(j);
  evaluate(first);

  std::vector<std::size_t> second;
  for (auto j : first)
    if (values[j] > tau && !known[j + 1]) {
      second.push_back(j + 1);
      known[j + 1] = 2;  // queued
    }
  evaluate(second);

  std::size_t skips = 0;
  for (auto j : first) {
    if (values[j] > tau) {
      welford_update(acc, order[j], values[j + 1] - values[j]);
    } else {
      ++skips;
    }
  }
  return skips;
}

/// Adaptive top-k identification: Monte Carlo passes restricted to the
/// players whose interval phi_hat_i +- delta_i still covers the current
/// k-th largest estimate, delta_i = z_alpha * sigma_i / sqrt(n_i).
/// Players with fewer than min_samples samples have an unbounded interval.
inline EstimateReport estimate_snv(const CooperativeGame& game, const EstimatorConfig& cfg,
                                   WorkerPool* pool = nullptr) {
  cfg.validate();
  const std::size_t n = game.n_players();
  if (n < 2) throw PreconditionError("estimate_snv: need at least two players");
  const std::size_t k = budget_k(cfg.capacity_ratio, n);
  if (k < 1)
    throw ConfigError(fmt::format("estimate_snv: floor(c * N) = 0 for c = {} and N = {}",
                                  cfg.capacity_ratio, n));
  const double z = z_critical(cfg.confidence);
  constexpr double inf = std::numeric_limits<double>::infinity();

  EstimateReport report;
  report.config = cfg;
  ShapleyAccumulator acc(n);
  Bits active(n, 1);
  std::vector<double> delta(n, inf);
  CounterRng rng(cfg.seed);

  if (k == n) {
    // Nothing is rejected; there is no boundary to resolve.
    report.converged = true;
  }
  while (!report.converged && report.permutations_used < cfg.max_permutations) {
    report.truncated_skips +=
        sample_permutation_pass(game, acc, active, cfg.truncation_threshold, rng, pool);
    ++report.permutations_used;

    for (std::size_t i = 0; i < n; ++i) {
      delta[i] = acc.count[i] >= cfg.min_samples
                     ? z * acc.stddev(i) / std::sqrt(static_cast<double>(acc.count[i]))
                     : inf;
    }
    if (!cfg.racing) continue;

    std::vector<double> sorted = acc.mean;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     sorted.end(), std::greater<>());
    const double kth = sorted[k - 1];
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      active[i] = std::abs(acc.mean[i] - kth) < delta[i] ? 1 : 0;
      any = any || active[i];
    }
    if (!any) report.converged = true;
  }

  report.phi_hat = acc.mean;
  report.counts = acc.count;
  report.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) report.sigma[i] = acc.stddev(i);
  report.half_width = delta;
  report.mask = top_k_mask(acc.mean, k);
  return report;
}

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const EstimatorConfig& cfg) {
  nlohmann::json j;
  j["capacity_ratio"] = cfg.capacity_ratio;
  // JSON has no infinities; -inf (disabled truncation) is spelled "-inf".
  if (std::isinf(cfg.truncation_threshold))
    j["truncation_threshold"] = cfg.truncation_threshold < 0 ? "-inf" : "inf";
  else
    j["truncation_threshold"] = cfg.truncation_threshold;
  j["confidence"] = cfg.confidence;
  j["min_samples"] = cfg.min_samples;
  j["max_permutations"] = cfg.max_permutations;
  j["racing"] = cfg.racing;
  return j;
}

inline nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["phi_hat"] = r.phi_hat;
  j["counts"] = r.counts;
  j["mask"] = r.mask.bits;
  j["permutations_used"] = r.permutations_used;
  j["truncated_skips"] = r.truncated_skips;
  j["converged"] = r.converged;
  j["seed"] = r.config.seed;
  j["config"] = to_json(r.config);
  auto& hw = j["half_width"] = nlohmann::json::array();
  for (double d : r.half_width) hw.push_back(detail::finite_or_null(d));
  return j;
}

/// CSV rows of (neuron_index, phi_hat, n, sigma, selected); sigma is empty
/// below two samples.
inline std::string estimate_csv(const EstimateReport& r) {
  std::string out = "neuron_index,phi_hat,n,sigma,selected\n";
  for (std::size_t i = 0; i < r.phi_hat.size(); ++i) {
    out += fmt::format("{},{},{},{},{}\n", i, r.phi_hat[i], r.counts[i],
                       std::isfinite(r.sigma[i]) ? fmt::format("{}", r.sigma[i]) : "",
                       static_cast<int>(r.mask.bits[i]));
  }
  return out;
}

}  // namespace snv

#endif  // SNV_ESTIMATOR_HPP
