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
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/error.hpp"
#include "kmpbias/kmp.hpp"

namespace kmpbias {

/// B compiled biasing phrases sharing one per-token bonus delta.
///
/// Duplicate phrases are dropped at construction (first occurrence kept);
/// duplicates() reports how many were removed so callers can warn.
class PhraseSet {
 public:
  PhraseSet(std::vector<Pattern> patterns, double per_token_bonus) : delta_(per_token_bonus) {
    if (!(per_token_bonus >= 0.0)) throw ContractError("per-token bonus must be non-negative");
    std::set<std::vector<TokenId>> seen;
    for (auto& p : patterns) {
      if (p.size() == 0) throw InvalidPatternError("phrase set contains an empty pattern");
      if (!seen.insert(p.tokens()).second) {
        ++duplicates_;
        continue;
      }
      gamma_bar_ = std::max(gamma_bar_, p.gamma());
      max_length_ = std::max(max_length_, p.size());
      patterns_.push_back(std::move(p));
    }
    if (patterns_.empty()) throw ContractError("phrase set must hold at least one phrase");
  }

  static PhraseSet from_tokens(const std::vector<std::vector<TokenId>>& phrases, double per_token_bonus) {
    std::vector<Pattern> patterns;
    patterns.reserve(phrases.size());
    for (const auto& tokens : phrases) patterns.push_back(compile_pattern(tokens));
    return PhraseSet(std::move(patterns), per_token_bonus);
  }

  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }
  const Pattern& operator[](std::size_t b) const { return patterns_[b]; }
  int size() const noexcept { return static_cast<int>(patterns_.size()); }
  double delta() const noexcept { return delta_; }
  int gamma_bar() const noexcept { return gamma_bar_; }
  int max_length() const noexcept { return max_length_; }
  int duplicates() const noexcept { return duplicates_; }

  /// Same phrases with a different per-token bonus.
  PhraseSet with_delta(double per_token_bonus) const {
    PhraseSet copy = *this;
    if (!(per_token_bonus >= 0.0)) throw ContractError("per-token bonus must be non-negative");
    copy.delta_ = per_token_bonus;
    return copy;
  }

 private:
  std::vector<Pattern> patterns_;
  double delta_ = 0.0;
  int gamma_bar_ = 0;
  int max_length_ = 0;
  int duplicates_ = 0;
};

/// Partial-match lengths, one per phrase.
struct MatchState {
  std::vector<int> lengths;

  static MatchState initial(const PhraseSet& ps) { return MatchState{std::vector<int>(static_cast<std::size_t>(ps.size()), 0)}; }

  friend bool operator==(const MatchState&, const MatchState&) = default;
};

struct BonusResult {
  MatchState new_state;
  double bonus = 0.0;
  std::vector<int> matched_phrase_indices;
};

/// Linear partial-match score: length * delta.
inline double score(const PhraseSet& ps, int length) { return static_cast<double>(length) * ps.delta(); }

/// max_b score(length_b). `lengths` must have one entry per phrase; entries
/// equal to a phrase's full length are accepted (used transiently for the
/// completed-phrase potential).
inline double potential(const PhraseSet& ps, std::span<const int> lengths) {
  if (lengths.size() != static_cast<std::size_t>(ps.size())) throw ContractError("potential: state size does not match phrase count");
  double best = 0.0;
  for (std::size_t b = 0; b < lengths.size(); ++b) best = std::max(best, score(ps, lengths[b]));
  return best;
}

/// Potential of `state`, with optional per-phrase override lengths taking
/// precedence where present.
inline double potential(const PhraseSet& ps, const MatchState& state,
                        std::optional<std::span<const std::optional<int>>> override_lengths = std::nullopt) {
  if (!override_lengths) return potential(ps, state.lengths);
  if (override_lengths->size() != state.lengths.size()) throw ContractError("potential: override size does not match phrase count");
  std::vector<int> merged = state.lengths;
  for (std::size_t b = 0; b < merged.size(); ++b) {
    if ((*override_lengths)[b]) merged[b] = *(*override_lengths)[b];
  }
  return potential(ps, merged);
}

inline void validate_state(const PhraseSet& ps, std::span<const int> lengths) {
  if (lengths.size() != static_cast<std::size_t>(ps.size())) {
    throw StateCorruptionError("match state has " + std::to_string(lengths.size()) + " entries for " +
                               std::to_string(ps.size()) + " phrases");
  }
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] < 0 || lengths[b] >= ps[b].size()) {
      throw StateCorruptionError("phrase " + std::to_string(b) + " has invalid partial length " + std::to_string(lengths[b]));
    }
  }
}

/// Forwards every phrase on `x`; the bonus is the change in potential, with a
/// completed phrase counted at its full length. Any full match restarts
/// matching for all phrases.
inline BonusResult compute_bonus(const PhraseSet& ps, const MatchState& state, TokenId x) {
  validate_state(ps, state.lengths);
  const auto n = state.lengths.size();
  BonusResult out;
  out.new_state.lengths.resize(n);
  double before = 0.0;
  double after = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto r = forward(ps[b], state.lengths[b], x);
    const int v = r.full_match ? ps[b].size() : r.new_length;
    if (r.full_match) out.matched_phrase_indices.push_back(static_cast<int>(b));
    out.new_state.lengths[b] = r.new_length;
    before = std::max(before, score(ps, state.lengths[b]));
    after = std::max(after, score(ps, v));
  }
  out.bonus = after - before;
  if (!out.matched_phrase_indices.empty()) std::fill(out.new_state.lengths.begin(), out.new_state.lengths.end(), 0);
  return out;
}

}  // namespace kmpbias
