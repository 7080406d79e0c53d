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
#include <ranges>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kmpbias/error.hpp"

namespace kmpbias {

/// A compiled search pattern: its tokens, the shortcut failure table and the
/// worst-case number of determinization-loop iterations (gamma).
///
/// failure[i] is the length of the longest proper border of tokens[0..i),
/// except that a border whose next token equals tokens[i] is replaced by its
/// own failure value (a fallback that could only repeat the same mismatch).
/// failure[0] is always -1.
class Pattern {
 public:
  Pattern() = default;

  const std::vector<TokenId>& tokens() const noexcept { return tokens_; }
  const std::vector<int>& failure() const noexcept { return failure_; }
  int gamma() const noexcept { return gamma_; }
  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  TokenId operator[](int i) const { return tokens_[static_cast<std::size_t>(i)]; }

  friend bool operator==(const Pattern&, const Pattern&) = default;

 private:
  friend Pattern build_pattern(std::vector<TokenId> tokens, std::size_t* builder_steps);

  std::vector<TokenId> tokens_;
  std::vector<int> failure_;
  int gamma_ = 0;
};

struct ForwardResult {
  int new_length = 0;
  bool full_match = false;

  friend bool operator==(const ForwardResult&, const ForwardResult&) = default;
};

namespace detail {

// Chain length from `start` down to -1, i.e. how many times the
// determinization loop can apply the table before it runs out of fallbacks.
inline int failure_chain_length(const std::vector<int>& failure, int start) {
  int steps = 0;
  for (int k = start; k >= 0; k = failure[static_cast<std::size_t>(k)]) ++steps;
  return steps;
}

}  // namespace detail

/// Builds the failure table in O(m). If `builder_steps` is given it receives
/// the number of inner-loop iterations, which never exceeds 2m.
///
/// gamma is the maximum, over all states, of the chain length starting at
/// failure[i]; it is clamped to at least 1 so that a single-token pattern
/// still reports one table lookup.
inline Pattern build_pattern(std::vector<TokenId> tokens, std::size_t* builder_steps) {
  Pattern p;
  p.tokens_ = std::move(tokens);
  if (p.tokens_.empty()) throw InvalidPatternError("pattern must contain at least one token");
  for (TokenId t : p.tokens_) {
    if (t < 0) throw InvalidPatternError("negative token id in pattern");
  }

  const int m = p.size();
  p.failure_.assign(static_cast<std::size_t>(m), -1);
  std::size_t steps = 0;
  int k = 0;  // invariant: k = plain border length of tokens[0..i)
  for (int i = 1; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (p.tokens_[ui] == p.tokens_[static_cast<std::size_t>(k)]) {
      p.failure_[ui] = p.failure_[static_cast<std::size_t>(k)];  // shortcut
    } else {
      p.failure_[ui] = k;
      while (k >= 0 && p.tokens_[ui] != p.tokens_[static_cast<std::size_t>(k)]) {
        k = p.failure_[static_cast<std::size_t>(k)];
        ++steps;
      }
    }
    ++k;
    ++steps;
  }
  if (builder_steps) *builder_steps = steps;

  int gamma = 1;
  for (int i = 0; i < m; ++i) {
    gamma = std::max(gamma, detail::failure_chain_length(p.failure_, p.failure_[static_cast<std::size_t>(i)]));
  }
  p.gamma_ = gamma;
  return p;
}

template <std::ranges::input_range R>
Pattern compile_pattern(R&& tokens, std::size_t* builder_steps = nullptr) {
  std::vector<TokenId> copy;
  for (auto&& t : tokens) copy.push_back(static_cast<TokenId>(t));
  return build_pattern(std::move(copy), builder_steps);
}

inline Pattern compile_pattern(std::initializer_list<TokenId> tokens) {
  return compile_pattern(std::span<const TokenId>(tokens.begin(), tokens.size()));
}

/// Consumes token `x` from partial-match state `length`. A full match resets
/// the state to zero. `loop_iterations`, when given, receives the number of
/// determinization-loop iterations executed.
inline ForwardResult forward(const Pattern& p, int length, TokenId x, int* loop_iterations = nullptr) {
  if (length < 0 || length >= p.size()) {
    throw StateCorruptionError("partial match length " + std::to_string(length) + " outside [0, " +
                               std::to_string(p.size()) + ")");
  }
  const auto& tok = p.tokens();
  const auto& fail = p.failure();
  int iterations = 0;
  ForwardResult r;
  if (tok[static_cast<std::size_t>(length)] == x) {
    r.new_length = length + 1;
    if (r.new_length == p.size()) {
      r.full_match = true;
      r.new_length = 0;
    }
  } else {
    int k = fail[static_cast<std::size_t>(length)];
    while (k >= 0 && tok[static_cast<std::size_t>(k)] != x) {
      k = fail[static_cast<std::size_t>(k)];
      ++iterations;
    }
    r.new_length = k + 1;
  }
  if (loop_iterations) *loop_iterations = iterations;
  return r;
}

/// Dense m x |V| automaton equivalent to repeated forward() calls.
struct TransitionTable {
  int states = 0;
  int vocab_size = 0;
  std::vector<int> next;            // row-major, states x vocab_size
  std::vector<unsigned char> full;  // 1 where the transition completes the pattern

  int at(int state, TokenId x) const {
    return next[static_cast<std::size_t>(state) * static_cast<std::size_t>(vocab_size) + static_cast<std::size_t>(x)];
  }
  bool full_match(int state, TokenId x) const {
    return full[static_cast<std::size_t>(state) * static_cast<std::size_t>(vocab_size) + static_cast<std::size_t>(x)] != 0;
  }
};

inline TransitionTable expand_transition_table(const Pattern& p, int vocab_size) {
  if (vocab_size <= 0) throw InvalidVocabError("vocabulary size must be positive");
  for (TokenId t : p.tokens()) {
    if (t >= vocab_size) {
      throw InvalidVocabError("pattern token " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
  }
  TransitionTable table;
  table.states = p.size();
  table.vocab_size = vocab_size;
  const auto cells = static_cast<std::size_t>(p.size()) * static_cast<std::size_t>(vocab_size);
  table.next.resize(cells);
  table.full.resize(cells);
  for (int i = 0; i < p.size(); ++i) {
    for (TokenId x = 0; x < vocab_size; ++x) {
      const auto r = forward(p, i, x);
      const auto cell = static_cast<std::size_t>(i) * static_cast<std::size_t>(vocab_size) + static_cast<std::size_t>(x);
      table.next[cell] = r.new_length;
      table.full[cell] = r.full_match ? 1 : 0;
    }
  }
  return table;
}

/// Positions (start indices) where forward() reports a full match while
/// scanning `text`; matches never overlap.
inline std::vector<std::size_t> scan(const Pattern& p, std::span<const TokenId> text, int* max_loop_iterations = nullptr) {
  std::vector<std::size_t> hits;
  int state = 0;
  int worst = 0;
  for (std::size_t j = 0; j < text.size(); ++j) {
    int iters = 0;
    const auto r = forward(p, state, text[j], &iters);
    worst = std::max(worst, iters);
    if (r.full_match) hits.push_back(j + 1 - static_cast<std::size_t>(p.size()));
    state = r.new_length;
  }
  if (max_loop_iterations) *max_loop_iterations = worst;
  return hits;
}

}  // namespace kmpbias
