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

#ifndef SNV_GAME_HPP
#define SNV_GAME_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "snv/coalition.hpp"
#include "snv/error.hpp"
#include "snv/parallel.hpp"

namespace snv {

/// Cooperative game over n players with a black-box characteristic function.
///
/// Copies share the same value function and memo table. value() may be
/// called from several threads at once; the wrapped function must be pure.
class CooperativeGame {
 public:
  using ValueFn = std::function<double(const Coalition&)>;

  CooperativeGame(std::size_t n_players, ValueFn fn, bool memoize = true)
      : state_(std::make_shared<State>()) {
    detail::require(n_players > 0, "a game needs at least one player");
    detail::require(static_cast<bool>(fn), "value function is empty");
    state_->n_players = n_players;
    state_->fn = std::move(fn);
    state_->memoize = memoize;
  }

  std::size_t n_players() const noexcept { return state_->n_players; }

  double value(const Coalition& s) const {
    if (s.n_players() != state_->n_players)
      throw PreconditionError("coalition universe size does not match the game");
    if (state_->memoize) {
      std::shared_lock lock(state_->mutex);
      if (auto it = state_->memo.find(s); it != state_->memo.end()) return it->second;
    }
    double v = 0.0;
    try {
      v = state_->fn(s);
    } catch (const GameEvaluationError&) {
      throw;
    } catch (const std::exception& e) {
      throw GameEvaluationError(s.to_hex(), e.what());
    }
    if (state_->memoize) {
      std::unique_lock lock(state_->mutex);
      state_->memo.emplace(s, v);
    }
    return v;
  }

  double empty_value() const { return value(Coalition(n_players())); }
  double grand_value() const { return value(Coalition::full(n_players())); }

  std::size_t memo_size() const {
    std::shared_lock lock(state_->mutex);
    return state_->memo.size();
  }

 private:
  struct State {
    std::size_t n_players = 0;
    ValueFn fn;
    bool memoize = true;
    mutable std::shared_mutex mutex;
    std::unordered_map<Coalition, double, CoalitionHash> memo;
  };

  std::shared_ptr<State> state_;
};

/// Players are indexed 0..N-1; baseline = V(empty), grand = V(all).
struct ShapleyVector {
  std::vector<double> phi;
  double baseline = 0.0;
  double grand = 0.0;

  double total() const { return std::accumulate(phi.begin(), phi.end(), 0.0); }

  /// sum(phi) - (V(all) - V(empty)); zero for exact values.
  double rebased_efficiency_gap() const { return total() - (grand - baseline); }

  /// sum(phi) - V(all); only zero when V(empty) = 0.
  double raw_efficiency_gap() const { return total() - grand; }
};

inline constexpr std::size_t kMaxExactPlayers = 20;
inline constexpr std::size_t kMaxPermutationPlayers = 10;

/// V(s + {i}) - V(s). Requires i not in s.
inline double marginal(const CooperativeGame& game, const Coalition& s, std::size_t i) {
  if (s.contains(i))
    throw PreconditionError("marginal: player " + std::to_string(i) +
                            " is already in the coalition");
  return game.value(s.with(i)) - game.value(s);
}

namespace detail {

/// V for every subset, indexed by bitmask. Evaluation is spread over the
/// pool; the table itself is worker-count independent.
inline std::vector<double> value_table(const CooperativeGame& game, WorkerPool* pool) {
  const std::size_t n = game.n_players();
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> values(count);
  auto eval = [&](std::size_t mask) {
    values[mask] = game.value(Coalition::from_mask(n, mask));
  };
  if (pool) {
    pool->parallel_for(count, eval);
  } else {
    for (std::size_t m = 0; m < count; ++m) eval(m);
  }
  return values;
}

inline unsigned __int128 factorial128(std::size_t n) {
  unsigned __int128 f = 1;
  for (std::size_t k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace detail

/// Exact Shapley values by subset enumeration,
///   phi_i = sum_{S not containing i} |S|!(N-|S|-1)!/N! [V(S+i) - V(S)].
/// Marginals are summed per coalition size first and weighted once per size;
/// the weights come from exact 128-bit factorials. Refuses N > 20.
inline ShapleyVector exact_shapley(const CooperativeGame& game, WorkerPool* pool = nullptr) {
  const std::size_t n = game.n_players();
  if (n > kMaxExactPlayers)
    throw CapacityRefused("exact_shapley: " + std::to_string(n) +
                          " players exceeds the enumeration limit of " +
                          std::to_string(kMaxExactPlayers));
  const auto values = detail::value_table(game, pool);

  const auto n_fact = detail::factorial128(n);
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto num = detail::factorial128(s) * detail::factorial128(n - s - 1);
    weight[s] = static_cast<double>(static_cast<long double>(num) /
                                    static_cast<long double>(n_fact));
  }

  // by_size[s][i] = sum over |S| = s, i not in S of the marginal of i.
  std::vector<std::vector<double>> by_size(n, std::vector<double>(n, 0.0));
  const std::size_t count = values.size();
  for (std::size_t mask = 0; mask < count; ++mask) {
    const auto s = static_cast<std::size_t>(std::popcount(mask));
    if (s == n) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      if (mask & bit) continue;
      by_size[s][i] += values[mask | bit] - values[mask];
    }
  }

  ShapleyVector out;
  out.phi.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < n; ++s) out.phi[i] += weight[s] * by_size[s][i];
  out.baseline = values.front();
  out.grand = values.back();
  return out;
}

/// Exact Shapley values by averaging marginals over all N! orderings.
/// Independent of exact_shapley's subset weights; refuses N > 10.
inline ShapleyVector exact_shapley_permutation(const CooperativeGame& game,
                                               WorkerPool* pool = nullptr) {
  const std::size_t n = game.n_players();
  if (n > kMaxPermutationPlayers)
    throw CapacityRefused("exact_shapley_permutation: " + std::to_string(n) +
                          " players exceeds the enumeration limit of " +
                          std::to_string(kMaxPermutationPlayers));
  const auto values = detail::value_table(game, pool);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sum(n, 0.0);
  std::uint64_t perms = 0;
  do {
    std::size_t prefix = 0;
    for (auto i : order) {
      const std::size_t next = prefix | (std::size_t{1} << i);
      sum[i] += values[next] - values[prefix];
      prefix = next;
    }
    ++perms;
  } while (std::next_permutation(order.begin(), order.end()));

  ShapleyVector out;
  out.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.phi[i] = sum[i] / static_cast<double>(perms);
  out.baseline = values.front();
  out.grand = values.back();
  return out;
}

/// Game defined by an explicit table of 2^N coalition values.
inline CooperativeGame table_game(std::vector<double> values) {
  const std::size_t count = values.size();
  detail::require(count >= 2 && std::has_single_bit(count),
                  "table game needs 2^N entries with N >= 1");
  const auto n = static_cast<std::size_t>(std::countr_zero(count));
  auto table = std::make_shared<const std::vector<double>>(std::move(values));
  return CooperativeGame(
      n, [table](const Coalition& s) { return (*table)[s.low_mask()]; }, false);
}

/// Parses the text table format: one `bitmask_hex value` pair per line,
/// covering every coalition of N players exactly once. Blank lines and
/// lines starting with '#' are ignored.
inline std::vector<double> parse_game_table(std::istream& in) {
  std::map<std::uint64_t, double> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string hex, value_text, extra;
    if (!(fields >> hex >> value_text) || (fields >> extra))
      throw DataError("game table line " + std::to_string(line_no) +
                      ": expected `bitmask_hex value`");
    if (hex.size() > 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) hex = hex.substr(2);
    std::uint64_t mask = 0;
    double value = 0.0;
    try {
      std::size_t used = 0;
      mask = std::stoull(hex, &used, 16);
      if (used != hex.size()) throw std::invalid_argument("trailing characters");
      value = std::stod(value_text, &used);
      if (used != value_text.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError("game table line " + std::to_string(line_no) + ": cannot parse `" +
                      line + "`");
    }
    if (mask >> kMaxExactPlayers)
      throw CapacityRefused("game table line " + std::to_string(line_no) + ": coalition " + hex +
                            " needs more than " + std::to_string(kMaxExactPlayers) +
                            " players; exact valuation is limited to that many");
    if (!entries.emplace(mask, value).second)
      throw DataError("game table line " + std::to_string(line_no) + ": duplicate coalition " +
                      hex);
  }
  const std::size_t count = entries.size();
  if (count < 2 || !std::has_single_bit(count))
    throw DataError("game table has " + std::to_string(count) +
                    " coalitions; an exhaustive table needs 2^N with N >= 1");
  if (entries.rbegin()->first != count - 1)
    throw DataError("game table is not exhaustive over " +
                    std::to_string(std::countr_zero(count)) + " players");
  std::vector<double> values;
  values.reserve(count);
  for (const auto& [mask, v] : entries) values.push_back(v);
  return values;
}

inline CooperativeGame load_game_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open game table " + path);
  return table_game(parse_game_table(in));
}

inline void write_game_table(std::ostream& out, const CooperativeGame& game) {
  const std::size_t n = game.n_players();
  detail::require(n <= kMaxExactPlayers, "write_game_table: too many players");
  out.precision(17);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    out << Coalition::from_mask(n, mask).to_hex() << ' '
        << game.value(Coalition::from_mask(n, mask)) << '\n';
  }
}

}  // namespace snv

#endif  // SNV_GAME_HPP
