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

#ifndef SNV_MASK_HPP
#define SNV_MASK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "snv/error.hpp"

namespace snv {

using Bits = std::vector<std::uint8_t>;

inline std::size_t popcount(const Bits& bits) {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

/// Neurons selected for one task (S_t).
struct TaskMask {
  Bits bits;
  int task_id = 0;

  std::size_t size() const noexcept { return bits.size(); }
  std::size_t count() const { return popcount(bits); }
  friend bool operator==(const TaskMask&, const TaskMask&) = default;
};

/// Union of all task masks so far (B_t). Only ever grows.
struct CumulativeMask {
  Bits bits;

  CumulativeMask() = default;
  explicit CumulativeMask(std::size_t n) : bits(n, 0) {}

  std::size_t size() const noexcept { return bits.size(); }
  std::size_t count() const { return popcount(bits); }
  bool all() const { return count() == bits.size(); }
  friend bool operator==(const CumulativeMask&, const CumulativeMask&) = default;
};

inline CumulativeMask union_mask(const CumulativeMask& prev, const TaskMask& s) {
  if (prev.size() != s.size()) throw ShapeError("union_mask: length mismatch");
  CumulativeMask out = prev;
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = (prev.bits[i] | s.bits[i]) ? 1 : 0;
  return out;
}

/// floor(c * N), tolerant to representation error in c (0.3 * 10 -> 3).
inline std::size_t budget_k(double capacity_ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(capacity_ratio * static_cast<double>(n) + 1e-9));
}

/// Ones at the k largest values; ties go to the lower index.
inline TaskMask top_k_mask(const std::vector<double>& phi, std::size_t k) {
  if (k < 1 || k > phi.size())
    throw PreconditionError("top_k_mask: k must lie in [1, N]");
  std::vector<std::size_t> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });
  TaskMask mask;
  mask.bits.assign(phi.size(), 0);
  for (std::size_t r = 0; r < k; ++r) mask.bits[order[r]] = 1;
  return mask;
}

}  // namespace snv

#endif  // SNV_MASK_HPP
