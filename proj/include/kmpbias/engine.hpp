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

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/batch_engine.hpp"
#include "kmpbias/bias_scorer.hpp"
#include "kmpbias/prefix_scorer.hpp"

namespace kmpbias {

enum class EngineKind { scalar, batch };

inline std::string to_string(EngineKind k) { return k == EngineKind::scalar ? "scalar" : "batch"; }

inline EngineKind parse_engine_kind(const std::string& s) {
  if (s == "scalar") return EngineKind::scalar;
  if (s == "batch") return EngineKind::batch;
  throw ContractError("unknown engine '" + s + "' (expected scalar or batch)");
}

struct ExpansionScore {
  PrefixedMatchState state;
  double bonus = 0.0;
  std::vector<int> matched_phrase_indices;
};

/// Scores a grid of token expansions: parents.size() rows, tokens.cols
/// candidates per row. Blank and kSkipToken entries keep the parent state and
/// earn no bonus; every other entry counts as one bonus computation.
class BiasEngine {
 public:
  BiasEngine(PhraseSet phrases, PrefixSet prefixes, std::optional<TokenId> blank)
      : phrases_(std::move(phrases)), prefixes_(std::move(prefixes)), blank_(blank) {}
  virtual ~BiasEngine() = default;

  BiasEngine(const BiasEngine&) = delete;
  BiasEngine& operator=(const BiasEngine&) = delete;

  virtual void score(std::span<const PrefixedMatchState* const> parents, const TokenMatrix& tokens,
                     std::vector<ExpansionScore>& out) = 0;
  virtual EngineKind kind() const noexcept = 0;

  PrefixedMatchState initial_state() const { return PrefixedMatchState::initial(phrases_, prefixes_); }
  const PhraseSet& phrases() const noexcept { return phrases_; }
  const PrefixSet& prefixes() const noexcept { return prefixes_; }
  std::optional<TokenId> blank() const noexcept { return blank_; }

  std::size_t bonus_calls() const noexcept { return bonus_calls_; }
  void reset_counters() noexcept { bonus_calls_ = 0; }

 protected:
  bool passes_through(TokenId x) const { return detail::passes_through(x, blank_); }
  void count_calls(std::size_t n) noexcept { bonus_calls_ += n; }

  void check_shape(std::span<const PrefixedMatchState* const> parents, const TokenMatrix& tokens) const {
    if (tokens.rows != static_cast<int>(parents.size())) throw ContractError("token matrix rows do not match parent count");
    if (tokens.ids.size() != static_cast<std::size_t>(tokens.rows) * static_cast<std::size_t>(tokens.cols)) {
      throw ContractError("token matrix storage does not match its shape");
    }
  }

 private:
  PhraseSet phrases_;
  PrefixSet prefixes_;
  std::optional<TokenId> blank_;
  std::size_t bonus_calls_ = 0;
};

/// One compute_bonus (or compute_bonus_prefixed) call per entry.
class ScalarEngine final : public BiasEngine {
 public:
  using BiasEngine::BiasEngine;

  EngineKind kind() const noexcept override { return EngineKind::scalar; }

  void score(std::span<const PrefixedMatchState* const> parents, const TokenMatrix& tokens,
             std::vector<ExpansionScore>& out) override {
    check_shape(parents, tokens);
    out.resize(tokens.ids.size());
    std::size_t calls = 0;
    for (int k = 0; k < tokens.rows; ++k) {
      const PrefixedMatchState& parent = *parents[static_cast<std::size_t>(k)];
      for (int f = 0; f < tokens.cols; ++f) {
        auto& slot = out[static_cast<std::size_t>(k) * static_cast<std::size_t>(tokens.cols) + static_cast<std::size_t>(f)];
        const TokenId x = tokens.at(k, f);
        slot.matched_phrase_indices.clear();
        if (passes_through(x)) {
          slot.state = parent;
          slot.bonus = 0.0;
          continue;
        }
        ++calls;
        if (prefixes().empty()) {
          auto r = compute_bonus(phrases(), MatchState{parent.phrase_lengths}, x);
          slot.state.phrase_lengths = std::move(r.new_state.lengths);
          slot.state.prefix_lengths.clear();
          slot.state.prefix_mask.assign(slot.state.phrase_lengths.size(), false);
          slot.bonus = r.bonus;
          slot.matched_phrase_indices = std::move(r.matched_phrase_indices);
        } else {
          auto r = compute_bonus_prefixed(phrases(), prefixes(), parent, x);
          slot.state = std::move(r.new_state);
          slot.bonus = r.bonus;
          slot.matched_phrase_indices = std::move(r.matched_phrase_indices);
        }
      }
    }
    count_calls(calls);
  }
};

/// Gathers parent rows into a dense grid and runs the masked batch kernels.
class BatchEngine final : public BiasEngine {
 public:
  BatchEngine(PhraseSet phrases, PrefixSet prefixes, std::optional<TokenId> blank, int vocab_size)
      : BiasEngine(std::move(phrases), std::move(prefixes), blank),
        bank_(this->phrases().patterns(), vocab_size),
        prefix_bank_(this->prefixes().patterns(), vocab_size) {}

  EngineKind kind() const noexcept override { return EngineKind::batch; }
  const PhraseBank& bank() const noexcept { return bank_; }

  void score(std::span<const PrefixedMatchState* const> parents, const TokenMatrix& tokens,
             std::vector<ExpansionScore>& out) override {
    check_shape(parents, tokens);
    const bool prefixed = !prefixes().empty();
    const int n = tokens.rows;
    grid_.resize(n, bank_.rows(), prefix_bank_.rows(), prefixed);
    for (int k = 0; k < n; ++k) {
      if (prefixed) {
        validate_state(phrases(), prefixes(), *parents[static_cast<std::size_t>(k)]);
        grid_.set_row(k, *parents[static_cast<std::size_t>(k)]);
      } else {
        grid_.set_row(k, MatchState{parents[static_cast<std::size_t>(k)]->phrase_lengths});
      }
    }
    if (prefixed) {
      batch_forward_prefixed_into(bank_, prefix_bank_, phrases().delta(), prefixes().boost(), grid_, tokens, blank(), ws_, result_);
    } else {
      batch_compute_bonus_into(bank_, phrases().delta(), grid_, tokens, blank(), ws_, result_);
    }

    out.resize(tokens.ids.size());
    std::size_t calls = 0;
    for (std::size_t row = 0; row < tokens.ids.size(); ++row) {
      auto& slot = out[row];
      const int r = static_cast<int>(row);
      slot.matched_phrase_indices.clear();
      if (!passes_through(tokens.ids[row])) {
        ++calls;
        for (int b = 0; b < bank_.rows(); ++b) {
          if (result_.phrase_matched(r, b)) slot.matched_phrase_indices.push_back(b);
        }
      }
      slot.bonus = result_.bonus[row];
      if (prefixed) {
        slot.state = result_.next.prefixed_row(r);
      } else {
        slot.state.phrase_lengths = result_.next.row(r).lengths;
        slot.state.prefix_lengths.clear();
        slot.state.prefix_mask.assign(slot.state.phrase_lengths.size(), false);
      }
    }
    count_calls(calls);
  }

 private:
  PhraseBank bank_;
  PhraseBank prefix_bank_;
  StateGrid grid_;
  BatchWorkspace ws_;
  BatchResult result_;
};

inline std::unique_ptr<BiasEngine> make_engine(EngineKind kind, PhraseSet phrases, PrefixSet prefixes,
                                               std::optional<TokenId> blank, int vocab_size) {
  if (kind == EngineKind::batch) return std::make_unique<BatchEngine>(std::move(phrases), std::move(prefixes), blank, vocab_size);
  return std::make_unique<ScalarEngine>(std::move(phrases), std::move(prefixes), blank);
}

}  // namespace kmpbias
