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

#ifndef SNV_STATS_HPP
#define SNV_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "snv/error.hpp"

namespace snv {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse of the standard normal CDF for p in (0, 1). Acklam's rational
/// approximation (|rel err| < 1.2e-9) followed by one Halley step.
inline double inverse_normal_cdf(double p) {
  detail::require(p > 0.0 && p < 1.0, "inverse_normal_cdf: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Two-sided standard-normal critical value: Phi(z) = 1 - (1 - alpha) / 2.
inline double z_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw PreconditionError("z_critical: confidence must lie in (0, 1)");
  return inverse_normal_cdf(1.0 - (1.0 - alpha) / 2.0);
}

/// Per-player running mean / M2 / count (Welford).
struct ShapleyAccumulator {
  std::vector<double> mean;
  std::vector<double> m2;
  std::vector<std::size_t> count;

  ShapleyAccumulator() = default;
  explicit ShapleyAccumulator(std::size_t n) : mean(n, 0.0), m2(n, 0.0), count(n, 0) {}

  std::size_t size() const noexcept { return mean.size(); }

  /// Sample variance m2/(n-1); NaN below two samples.
  double variance(std::size_t i) const {
    return count[i] >= 2 ? m2[i] / static_cast<double>(count[i] - 1)
                         : std::numeric_limits<double>::quiet_NaN();
  }

  double stddev(std::size_t i) const { return std::sqrt(variance(i)); }
};

inline void welford_update(ShapleyAccumulator& acc, std::size_t i, double delta) {
  detail::require(i < acc.size(), "welford_update: player index out of range");
  const auto n = ++acc.count[i];
  const double d = delta - acc.mean[i];
  acc.mean[i] += d / static_cast<double>(n);
  acc.m2[i] = std::max(0.0, acc.m2[i] + d * (delta - acc.mean[i]));
}

/// Chan et al. pairwise combination: folds `other` into `acc`.
inline void welford_merge(ShapleyAccumulator& acc, const ShapleyAccumulator& other) {
  detail::require(acc.size() == other.size(), "welford_merge: size mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto nb = other.count[i];
    if (nb == 0) continue;
    const auto na = acc.count[i];
    if (na == 0) {
      acc.mean[i] = other.mean[i];
      acc.m2[i] = other.m2[i];
      acc.count[i] = nb;
      continue;
    }
    const double n = static_cast<double>(na + nb);
    const double d = other.mean[i] - acc.mean[i];
    acc.mean[i] += d * static_cast<double>(nb) / n;
    acc.m2[i] += other.m2[i] + d * d * static_cast<double>(na) * static_cast<double>(nb) / n;
    acc.count[i] = na + nb;
  }
}

}  // namespace snv

#endif  // SNV_STATS_HPP
