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

#ifndef SNV_COALITION_HPP
#define SNV_COALITION_HPP

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "snv/error.hpp"

namespace snv {

/// A subset of players {0, ..., n_players-1}, stored as a packed bitset.
class Coalition {
 public:
  Coalition() = default;

  explicit Coalition(std::size_t n_players)
      : n_players_(n_players), words_((n_players + 63) / 64, 0) {}

  Coalition(std::size_t n_players, std::initializer_list<std::size_t> members)
      : Coalition(n_players) {
    for (auto i : members) insert(i);
  }

  static Coalition full(std::size_t n_players) {
    Coalition c(n_players);
    for (std::size_t i = 0; i < n_players; ++i) c.insert(i);
    return c;
  }

  /// Bit i of `mask` is player i. Requires n_players <= 64.
  static Coalition from_mask(std::size_t n_players, std::uint64_t mask) {
    detail::require(n_players <= 64, "from_mask supports at most 64 players");
    detail::require(n_players == 64 || (mask >> n_players) == 0,
                    "mask has bits beyond n_players");
    Coalition c(n_players);
    if (!c.words_.empty()) c.words_[0] = mask;
    return c;
  }

  static Coalition from_bits(const std::vector<std::uint8_t>& bits) {
    Coalition c(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) c.insert(i);
    return c;
  }

  std::size_t n_players() const noexcept { return n_players_; }

  bool contains(std::size_t i) const {
    check(i);
    return (words_[i / 64] >> (i % 64)) & 1U;
  }

  void insert(std::size_t i) {
    check(i);
    words_[i / 64] |= std::uint64_t{1} << (i % 64);
  }

  void erase(std::size_t i) {
    check(i);
    words_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
  }

  Coalition with(std::size_t i) const {
    Coalition c = *this;
    c.insert(i);
    return c;
  }

  Coalition without(std::size_t i) const {
    Coalition c = *this;
    c.erase(i);
    return c;
  }

  std::size_t cardinality() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool empty() const noexcept { return cardinality() == 0; }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_players_; ++i)
      if (contains(i)) out.push_back(i);
    return out;
  }

  std::vector<std::uint8_t> to_bits() const {
    std::vector<std::uint8_t> bits(n_players_);
    for (std::size_t i = 0; i < n_players_; ++i) bits[i] = contains(i) ? 1 : 0;
    return bits;
  }

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  /// Lowest word as an integer mask (exact when n_players <= 64).
  std::uint64_t low_mask() const noexcept { return words_.empty() ? 0 : words_[0]; }

  /// Hex rendering, most significant word first.
  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    bool leading = true;
    for (std::size_t w = words_.size(); w-- > 0;) {
      for (int nib = 15; nib >= 0; --nib) {
        const unsigned d = (words_[w] >> (nib * 4)) & 0xFU;
        if (leading && d == 0) continue;
        leading = false;
        out.push_back(digits[d]);
      }
    }
    return out.empty() ? "0" : out;
  }

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  void check(std::size_t i) const {
    if (i >= n_players_)
      throw PreconditionError("player index " + std::to_string(i) +
                              " out of range for " + std::to_string(n_players_) +
                              " players");
  }

  std::size_t n_players_ = 0;
  std::vector<std::uint64_t> words_;
};

struct CoalitionHash {
  std::size_t operator()(const Coalition& c) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ c.n_players();
    for (auto w : c.words()) {
      h ^= w + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace snv

#endif  // SNV_COALITION_HPP
