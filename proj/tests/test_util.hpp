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

// Shared fixtures for the unit and acceptance suites. The brute-force
// oracles here are deliberately naive and share no code with the library's
// Shapley routines.

#ifndef SNV_TESTS_TEST_UTIL_HPP
#define SNV_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "snv/snv.hpp"

namespace snv::testing {

using MaskFn = std::function<double(std::uint64_t)>;

inline CooperativeGame game_from(std::size_t n, MaskFn fn) {
  return CooperativeGame(n, [fn](const Coalition& s) { return fn(s.low_mask()); });
}

/// V({0,1}) = V({0,2}) = V({0,1,2}) = 1, else 0.
inline MaskFn glove_fn() {
  return [](std::uint64_t m) { return ((m & 1) && (m & 6)) ? 1.0 : 0.0; };
}

inline CooperativeGame glove_game() { return game_from(3, glove_fn()); }

inline CooperativeGame additive_game(std::size_t n) {
  return game_from(n, [](std::uint64_t m) { return static_cast<double>(std::popcount(m)); });
}

/// V(S) = sum of w_i over members.
inline MaskFn weighted_additive_fn(std::vector<double> w) {
  return [w](std::uint64_t m) {
    double v = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (m & (std::uint64_t{1} << i)) v += w[i];
    return v;
  };
}

/// A table of 2^n uniform values in [-1, 1).
inline std::vector<double> random_table(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> t(std::size_t{1} << n);
  for (auto& v : t) v = 2.0 * rng.uniform() - 1.0;
  return t;
}

inline MaskFn table_fn(std::vector<double> t) {
  return [t = std::move(t)](std::uint64_t m) { return t[m]; };
}

/// Averages V(pred + i) - V(pred) over every ordering, enumerated
/// recursively. Independent of the library's enumeration code.
inline std::vector<double> brute_force_shapley(std::size_t n, const MaskFn& v) {
  std::vector<double> sum(n, 0.0);
  double count = 0.0;
  std::vector<std::size_t> order;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&] {
    if (order.size() == n) {
      std::uint64_t pre = 0;
      for (auto i : order) {
        sum[i] += v(pre | (std::uint64_t{1} << i)) - v(pre);
        pre |= std::uint64_t{1} << i;
      }
      count += 1.0;
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = true;
      order.push_back(i);
      rec();
      order.pop_back();
      used[i] = false;
    }
  };
  rec();
  for (auto& s : sum) s /= count;
  return sum;
}

/// Row i of a labelled batch built from plain vectors.
inline LabeledBatch batch_of(const std::vector<std::vector<double>>& xs, const std::vector<std::size_t>& ys) {
  LabeledBatch b;
  b.inputs.resize(static_cast<Eigen::Index>(xs.front().size()), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j)
    for (std::size_t d = 0; d < xs[j].size(); ++d)
      b.inputs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = xs[j][d];
  b.labels = ys;
  return b;
}

inline LabeledBatch random_batch(std::size_t dim, std::size_t n, std::size_t classes, CounterRng& rng) {
  LabeledBatch b;
  b.inputs.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < b.inputs.cols(); ++c)
    for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) b.inputs(r, c) = rng.normal();
  for (std::size_t j = 0; j < n; ++j) b.labels.push_back(static_cast<std::size_t>(rng.below(classes)));
  return b;
}

/// Small blob stream used by the continual tests.
inline StreamConfig blob_stream(std::size_t n_tasks, std::uint64_t seed, std::size_t dim = 8) {
  StreamConfig s;
  s.n_tasks = n_tasks;
  s.classes_per_task = 2;
  s.input_dim = dim;
  s.samples_per_class = 100;
  s.blob_spread = 1.0;
  s.class_separation = 4.0;
  s.seed = seed;
  return s;
}

}  // namespace snv::testing

#endif  // SNV_TESTS_TEST_UTIL_HPP
