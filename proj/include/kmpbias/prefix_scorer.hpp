// Copyright 2026 The kmpbias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/bias_scorer.hpp"
#include "kmpbias/error.hpp"
#include "kmpbias/kmp.hpp"

namespace kmpbias {

/// Carrier phrases ("call", "open", "play") whose completion multiplies the
/// score of subsequent phrase matches by `boost`.
class PrefixSet {
 public:
  PrefixSet() = default;
  PrefixSet(std::vector<Pattern> prefixes, double boost) : prefixes_(std::move(prefixes)), boost_(boost) {
    if (!(boost >= 1.0)) throw ContractError("prefix boost must be >= 1");
    for (const auto& p : prefixes_) {
      if (p.size() == 0) throw InvalidPatternError("prefix set contains an empty pattern");
      gamma_bar_ = std::max(gamma_bar_, p.gamma());
    }
  }

  static PrefixSet from_tokens(const std::vector<std::vector<TokenId>>& prefixes, double boost) {
    std::vector<Pattern> patterns;
    patterns.reserve(prefixes.size());
    for (const auto& tokens : prefixes) patterns.push_back(compile_pattern(tokens));
    return PrefixSet(std::move(patterns), boost);
  }

  const std::vector<Pattern>& patterns() const noexcept { return prefixes_; }
  const Pattern& operator[](std::size_t c) const { return prefixes_[c]; }
  int size() const noexcept { return static_cast<int>(prefixes_.size()); }
  bool empty() const noexcept { return prefixes_.empty(); }
  double boost() const noexcept { return boost_; }
  int gamma_bar() const noexcept { return gamma_bar_; }

 private:
  std::vector<Pattern> prefixes_;
  double boost_ = 1.0;
  int gamma_bar_ = 0;
};

/// Phrase lengths (B), prefix lengths (C) and the per-phrase prefix mask (B).
struct PrefixedMatchState {
  std::vector<int> phrase_lengths;
  std::vector<int> prefix_lengths;
  std::vector<bool> prefix_mask;

  static PrefixedMatchState initial(const PhraseSet& ps, const PrefixSet& pfx) {
    return PrefixedMatchState{std::vector<int>(static_cast<std::size_t>(ps.size()), 0),
                              std::vector<int>(static_cast<std::size_t>(pfx.size()), 0),
                              std::vector<bool>(static_cast<std::size_t>(ps.size()), false)};
  }

  friend bool operator==(const PrefixedMatchState&, const PrefixedMatchState&) = default;
};

struct PrefixedBonusResult {
  PrefixedMatchState new_state;
  double bonus = 0.0;
  std::vector<int> matched_phrase_indices;
};

/// Score of one phrase under the prefix multiplier.
inline double boosted_score_raw(int length, bool masked, double delta, double boost) {
  const double s = static_cast<double>(length) * delta;
  return masked ? boost * s : s;
}

inline double boosted_score(const PhraseSet& ps, double boost, int length, bool masked) {
  return boosted_score_raw(length, masked, ps.delta(), boost);
}

/// max_b boost^mask_b * score(length_b). `override_lengths`, where set,
/// replaces the state's length for that phrase.
inline double potential_boosted(const PhraseSet& ps, const PrefixSet& pfx, const PrefixedMatchState& state,
                                std::optional<std::span<const std::optional<int>>> override_lengths = std::nullopt) {
  const auto n = state.phrase_lengths.size();
  if (n != static_cast<std::size_t>(ps.size()) || state.prefix_mask.size() != n) {
    throw ContractError("potential_boosted: state size does not match phrase count");
  }
  if (override_lengths && override_lengths->size() != n) throw ContractError("potential_boosted: override size mismatch");
  double best = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    int len = state.phrase_lengths[b];
    if (override_lengths && (*override_lengths)[b]) len = *(*override_lengths)[b];
    best = std::max(best, boosted_score(ps, pfx.boost(), len, state.prefix_mask[b]));
  }
  return best;
}

inline void validate_state(const PhraseSet& ps, const PrefixSet& pfx, const PrefixedMatchState& state) {
  validate_state(ps, state.phrase_lengths);
  if (state.prefix_mask.size() != state.phrase_lengths.size()) throw StateCorruptionError("prefix mask size does not match phrase count");
  if (state.prefix_lengths.size() != static_cast<std::size_t>(pfx.size())) {
    throw StateCorruptionError("prefix state has " + std::to_string(state.prefix_lengths.size()) + " entries for " +
                               std::to_string(pfx.size()) + " prefixes");
  }
  for (std::size_t c = 0; c < state.prefix_lengths.size(); ++c) {
    if (state.prefix_lengths[c] < 0 || state.prefix_lengths[c] >= pfx[c].size()) {
      throw StateCorruptionError("prefix " + std::to_string(c) + " has invalid partial length " + std::to_string(state.prefix_lengths[c]));
    }
  }
}

/// Bonus computation with carrier prefixes.
///
/// 1. Forward every phrase; ext_b is set when the phrase advanced or completed.
/// 2. mask_b &= ext_b.
/// 3. bonus = boosted potential after (updated mask, full length on completion)
///    minus boosted potential before (previous mask).
/// 4. Forward every prefix. If any completed, each phrase that was not extended
///    restarts at length 0 with its mask set.
/// 5. If any phrase completed, every length and mask bit is cleared.
inline PrefixedBonusResult compute_bonus_prefixed(const PhraseSet& ps, const PrefixSet& pfx, const PrefixedMatchState& state,
                                                  TokenId x) {
  validate_state(ps, pfx, state);
  const auto nb = state.phrase_lengths.size();
  const auto nc = state.prefix_lengths.size();
  const double lambda = pfx.boost();

  PrefixedBonusResult out;
  auto& next = out.new_state;
  next.phrase_lengths.resize(nb);
  next.prefix_lengths.resize(nc);
  next.prefix_mask.resize(nb);

  std::vector<bool> extended(nb, false);
  double before = 0.0;
  double after = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const int prev = state.phrase_lengths[b];
    const auto r = forward(ps[b], prev, x);
    const int v = r.full_match ? ps[b].size() : r.new_length;
    if (r.full_match) out.matched_phrase_indices.push_back(static_cast<int>(b));
    extended[b] = r.full_match || r.new_length > prev;
    const bool mask = state.prefix_mask[b] && extended[b];
    before = std::max(before, boosted_score(ps, lambda, prev, state.prefix_mask[b]));
    after = std::max(after, boosted_score(ps, lambda, v, mask));
    next.phrase_lengths[b] = r.new_length;
    next.prefix_mask[b] = mask;
  }
  out.bonus = after - before;

  bool any_prefix = false;
  for (std::size_t c = 0; c < nc; ++c) {
    const auto r = forward(pfx[c], state.prefix_lengths[c], x);
    next.prefix_lengths[c] = r.new_length;
    any_prefix = any_prefix || r.full_match;
  }
  if (any_prefix) {
    for (std::size_t b = 0; b < nb; ++b) {
      if (!extended[b]) {
        next.phrase_lengths[b] = 0;
        next.prefix_mask[b] = true;
      }
    }
  }
  if (!out.matched_phrase_indices.empty()) {
    std::fill(next.prefix_lengths.begin(), next.prefix_lengths.end(), 0);
    std::fill(next.phrase_lengths.begin(), next.phrase_lengths.end(), 0);
    std::fill(next.prefix_mask.begin(), next.prefix_mask.end(), false);
  }
  return out;
}

}  // namespace kmpbias
