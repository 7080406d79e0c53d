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

// Dense evaluation of bonus computation over a (hypothesis x expansion x
// phrase) grid. Every array is rectangular and every loop has a trip count
// fixed by the shapes and by gamma_bar, never by the data: the
// determinization loop runs exactly gamma_bar masked passes over all lanes,
// with converged lanes held in place by a select.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/bias_scorer.hpp"
#include "kmpbias/error.hpp"
#include "kmpbias/kmp.hpp"
#include "kmpbias/prefix_scorer.hpp"

namespace kmpbias {

inline constexpr int kMaxBankPatternLength = 16;

/// Token value marking an unused expansion slot; it passes through like blank.
inline constexpr TokenId kSkipToken = -1;

/// Patterns padded into B x Lmax token and failure matrices.
/// Token padding is vocab_size (never a real id), failure padding is -1.
class PhraseBank {
 public:
  PhraseBank() = default;

  PhraseBank(const std::vector<Pattern>& patterns, int vocab_size) : rows_(static_cast<int>(patterns.size())), fill_(vocab_size) {
    if (vocab_size <= 0) throw InvalidVocabError("vocabulary size must be positive");
    for (const auto& p : patterns) {
      if (p.size() > kMaxBankPatternLength) {
        throw ContractError("pattern of length " + std::to_string(p.size()) + " exceeds bank limit of " +
                            std::to_string(kMaxBankPatternLength));
      }
      width_ = std::max(width_, p.size());
      gamma_bar_ = std::max(gamma_bar_, p.gamma());
    }
    const auto cells = static_cast<std::size_t>(rows_) * static_cast<std::size_t>(width_);
    tokens_.assign(cells, fill_);
    failure_.assign(cells, -1);
    lengths_.reserve(patterns.size());
    for (std::size_t b = 0; b < patterns.size(); ++b) {
      const auto& p = patterns[b];
      for (int i = 0; i < p.size(); ++i) {
        if (p[i] >= vocab_size) throw InvalidVocabError("pattern token " + std::to_string(p[i]) + " outside vocabulary");
        tokens_[b * static_cast<std::size_t>(width_) + static_cast<std::size_t>(i)] = p[i];
        failure_[b * static_cast<std::size_t>(width_) + static_cast<std::size_t>(i)] = p.failure()[static_cast<std::size_t>(i)];
      }
      lengths_.push_back(p.size());
    }
  }

  int rows() const noexcept { return rows_; }
  int width() const noexcept { return width_; }
  int gamma_bar() const noexcept { return gamma_bar_; }
  TokenId fill() const noexcept { return fill_; }
  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::span<const std::int32_t> failure() const noexcept { return failure_; }
  std::span<const std::int32_t> lengths() const noexcept { return lengths_; }

  std::span<const TokenId> row_tokens(int b) const {
    return std::span<const TokenId>(tokens_).subspan(static_cast<std::size_t>(b) * static_cast<std::size_t>(width_),
                                                     static_cast<std::size_t>(width_));
  }
  std::span<const std::int32_t> row_failure(int b) const {
    return std::span<const std::int32_t>(failure_).subspan(static_cast<std::size_t>(b) * static_cast<std::size_t>(width_),
                                                           static_cast<std::size_t>(width_));
  }

 private:
  int rows_ = 0;
  int width_ = 0;
  int gamma_bar_ = 0;
  TokenId fill_ = 0;
  std::vector<TokenId> tokens_;
  std::vector<std::int32_t> failure_;
  std::vector<std::int32_t> lengths_;
};

/// Matching state of N hypotheses: lengths N x B, and when prefixes are in
/// use, prefix lengths N x C and the prefix mask N x B.
struct StateGrid {
  int hyps = 0;
  int phrases = 0;
  int prefixes = 0;
  bool prefixed = false;
  std::vector<std::int32_t> lengths;
  std::vector<std::int32_t> prefix_lengths;
  std::vector<std::uint8_t> mask;

  static StateGrid zeros(int hyps, int phrases) {
    StateGrid g;
    g.resize(hyps, phrases, 0, false);
    return g;
  }
  static StateGrid zeros_prefixed(int hyps, int phrases, int prefixes) {
    StateGrid g;
    g.resize(hyps, phrases, prefixes, true);
    return g;
  }

  // Reuses existing capacity; only allocates when growing.
  void resize(int n, int b, int c, bool with_prefix) {
    hyps = n;
    phrases = b;
    prefixes = with_prefix ? c : 0;
    prefixed = with_prefix;
    lengths.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(b), 0);
    prefix_lengths.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(prefixes), 0);
    mask.assign(with_prefix ? static_cast<std::size_t>(n) * static_cast<std::size_t>(b) : 0, 0);
  }

  std::int32_t& length(int h, int b) { return lengths[static_cast<std::size_t>(h) * static_cast<std::size_t>(phrases) + static_cast<std::size_t>(b)]; }
  std::int32_t length(int h, int b) const { return lengths[static_cast<std::size_t>(h) * static_cast<std::size_t>(phrases) + static_cast<std::size_t>(b)]; }

  MatchState row(int h) const {
    const auto begin = lengths.begin() + static_cast<std::ptrdiff_t>(h) * phrases;
    return MatchState{std::vector<int>(begin, begin + phrases)};
  }
  PrefixedMatchState prefixed_row(int h) const {
    PrefixedMatchState s;
    const auto lb = lengths.begin() + static_cast<std::ptrdiff_t>(h) * phrases;
    s.phrase_lengths.assign(lb, lb + phrases);
    const auto pb = prefix_lengths.begin() + static_cast<std::ptrdiff_t>(h) * prefixes;
    s.prefix_lengths.assign(pb, pb + prefixes);
    s.prefix_mask.resize(static_cast<std::size_t>(phrases));
    for (int b = 0; b < phrases; ++b) s.prefix_mask[static_cast<std::size_t>(b)] = mask[static_cast<std::size_t>(h * phrases + b)] != 0;
    return s;
  }

  void set_row(int h, const MatchState& s) {
    if (s.lengths.size() != static_cast<std::size_t>(phrases)) throw ContractError("state row width mismatch");
    std::copy(s.lengths.begin(), s.lengths.end(), lengths.begin() + static_cast<std::ptrdiff_t>(h) * phrases);
  }
  void set_row(int h, const PrefixedMatchState& s) {
    if (!prefixed || s.phrase_lengths.size() != static_cast<std::size_t>(phrases) ||
        s.prefix_lengths.size() != static_cast<std::size_t>(prefixes) || s.prefix_mask.size() != static_cast<std::size_t>(phrases)) {
      throw ContractError("prefixed state row shape mismatch");
    }
    std::copy(s.phrase_lengths.begin(), s.phrase_lengths.end(), lengths.begin() + static_cast<std::ptrdiff_t>(h) * phrases);
    std::copy(s.prefix_lengths.begin(), s.prefix_lengths.end(), prefix_lengths.begin() + static_cast<std::ptrdiff_t>(h) * prefixes);
    for (int b = 0; b < phrases; ++b) mask[static_cast<std::size_t>(h * phrases + b)] = s.prefix_mask[static_cast<std::size_t>(b)] ? 1 : 0;
  }
};

/// K x F token ids, row-major.
struct TokenMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<TokenId> ids;

  static TokenMatrix filled(int rows, int cols, TokenId value) {
    return TokenMatrix{rows, cols, std::vector<TokenId>(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), value)};
  }
  TokenId& at(int k, int f) { return ids[static_cast<std::size_t>(k) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(f)]; }
  TokenId at(int k, int f) const { return ids[static_cast<std::size_t>(k) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(f)]; }
};

/// Output of a batched call. `next` has K*F rows (row k*F + f).
struct BatchResult {
  StateGrid next;
  std::vector<double> bonus;          // K x F
  std::vector<std::uint8_t> matched;  // K x F x B, 1 where the phrase completed
  int loop_iterations = 0;            // masked passes executed, always gamma_bar

  bool phrase_matched(int row, int b) const { return matched[static_cast<std::size_t>(row) * static_cast<std::size_t>(next.phrases) + static_cast<std::size_t>(b)] != 0; }
};

/// Scratch lanes reused across calls.
struct BatchWorkspace {
  std::vector<std::int32_t> cursor;
  std::vector<std::uint8_t> settled;
  std::vector<std::int32_t> phrase_q;
  std::vector<std::uint8_t> phrase_full;
  std::vector<std::int32_t> prefix_q;
  std::vector<std::uint8_t> prefix_full;
};

namespace detail {

template <typename T>
void ensure_size(std::vector<T>& v, std::size_t n) {
  if (v.size() < n) v.resize(n);
}

// Forwards every (row k, slot f, pattern b) lane of `bank`. `prev` is N x B,
// tokens N x F; results land in q (N*F x B, the raw forward length) and full.
// Returns the number of masked passes, which is always bank.gamma_bar().
inline int forward_lanes(const PhraseBank& bank, std::span<const std::int32_t> prev, const TokenMatrix& tokens,
                         std::span<std::int32_t> q, std::span<std::uint8_t> full, BatchWorkspace& ws) {
  const std::size_t nb = static_cast<std::size_t>(bank.rows());
  const std::size_t w = static_cast<std::size_t>(bank.width());
  const std::size_t nf = static_cast<std::size_t>(tokens.cols);
  const std::size_t lanes = static_cast<std::size_t>(tokens.rows) * nf * nb;
  if (lanes == 0) return bank.gamma_bar();
  const auto tok = bank.tokens();
  const auto fail = bank.failure();
  auto* cur = ws.cursor.data();
  auto* settled = ws.settled.data();

  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const std::size_t b = lane % nb;
    const std::size_t kf = lane / nb;
    const std::size_t k = kf / nf;
    const TokenId x = tokens.ids[kf];
    const std::int32_t i = prev[k * nb + b];
    const bool hit = tok[b * w + static_cast<std::size_t>(i)] == x;
    const std::int32_t c = hit ? i : fail[b * w + static_cast<std::size_t>(i)];
    cur[lane] = c;
    settled[lane] = hit || c < 0 || tok[b * w + static_cast<std::size_t>(std::max(c, 0))] == x;
  }
  for (int it = 0; it < bank.gamma_bar(); ++it) {
    for (std::size_t lane = 0; lane < lanes; ++lane) {
      const std::size_t b = lane % nb;
      const TokenId x = tokens.ids[lane / nb];
      const std::int32_t c = cur[lane];
      const std::int32_t nxt = fail[b * w + static_cast<std::size_t>(std::max(c, 0))];
      const std::int32_t moved = settled[lane] ? c : nxt;
      cur[lane] = moved;
      settled[lane] = settled[lane] || moved < 0 || tok[b * w + static_cast<std::size_t>(std::max(moved, 0))] == x;
    }
  }
  std::size_t unsettled = 0;
  const auto len = bank.lengths();
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    unsettled += settled[lane] ? 0 : 1;
    const std::int32_t qq = cur[lane] + 1;
    const bool f = qq == len[lane % nb];
    full[lane] = f ? 1 : 0;
    q[lane] = qq;
  }
  if (unsettled != 0) throw ContractError("determinization loop did not converge within gamma_bar passes");
  return bank.gamma_bar();
}

inline void check_grid(const PhraseBank& bank, const StateGrid& grid, const TokenMatrix& tokens) {
  if (grid.phrases != bank.rows()) throw ContractError("state grid has " + std::to_string(grid.phrases) + " phrase columns, bank has " + std::to_string(bank.rows()));
  if (tokens.rows != grid.hyps) throw ContractError("token matrix has " + std::to_string(tokens.rows) + " rows, grid has " + std::to_string(grid.hyps));
  if (tokens.ids.size() != static_cast<std::size_t>(tokens.rows) * static_cast<std::size_t>(tokens.cols)) throw ContractError("token matrix storage does not match its shape");
  if (grid.lengths.size() != static_cast<std::size_t>(grid.hyps) * static_cast<std::size_t>(grid.phrases)) throw ContractError("state grid storage does not match its shape");
  const auto len = bank.lengths();
  for (int h = 0; h < grid.hyps; ++h) {
    for (int b = 0; b < grid.phrases; ++b) {
      const auto v = grid.length(h, b);
      if (v < 0 || v >= len[static_cast<std::size_t>(b)]) throw StateCorruptionError("state grid entry out of range");
    }
  }
}

inline bool passes_through(TokenId x, std::optional<TokenId> blank) { return x == kSkipToken || (blank && x == *blank); }

}  // namespace detail

/// Batched equivalent of compute_bonus. `out` is reshaped in place; after the
/// first call with a given shape no further allocation happens. Tokens equal
/// to `blank` (or kSkipToken) leave the state unchanged with zero bonus.
inline void batch_compute_bonus_into(const PhraseBank& bank, double delta, const StateGrid& grid, const TokenMatrix& tokens,
                                     std::optional<TokenId> blank, BatchWorkspace& ws, BatchResult& out) {
  detail::check_grid(bank, grid, tokens);
  const std::size_t nb = static_cast<std::size_t>(bank.rows());
  const std::size_t nk = static_cast<std::size_t>(tokens.rows);
  const std::size_t nf = static_cast<std::size_t>(tokens.cols);
  const std::size_t lanes = nk * nf * nb;
  detail::ensure_size(ws.cursor, lanes);
  detail::ensure_size(ws.settled, lanes);
  detail::ensure_size(ws.phrase_q, lanes);
  detail::ensure_size(ws.phrase_full, lanes);
  out.next.resize(static_cast<int>(nk * nf), bank.rows(), 0, false);
  out.bonus.assign(nk * nf, 0.0);
  out.matched.assign(lanes, 0);

  std::span<std::int32_t> q(ws.phrase_q.data(), lanes);
  std::span<std::uint8_t> full(ws.phrase_full.data(), lanes);
  out.loop_iterations = detail::forward_lanes(bank, grid.lengths, tokens, q, full, ws);

  const auto len = bank.lengths();
  for (std::size_t kf = 0; kf < nk * nf; ++kf) {
    const std::size_t k = kf / nf;
    const std::int32_t* prev = grid.lengths.data() + k * nb;
    std::int32_t* next = out.next.lengths.data() + kf * nb;
    if (detail::passes_through(tokens.ids[kf], blank)) {
      std::copy(prev, prev + nb, next);
      continue;
    }
    double before = 0.0;
    double after = 0.0;
    bool any = false;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lane = kf * nb + b;
      const bool f = full[lane] != 0;
      const std::int32_t v = f ? len[b] : q[lane];
      before = std::max(before, static_cast<double>(prev[b]) * delta);
      after = std::max(after, static_cast<double>(v) * delta);
      next[b] = f ? 0 : q[lane];
      out.matched[lane] = f ? 1 : 0;
      any = any || f;
    }
    out.bonus[kf] = after - before;
    if (any) std::fill(next, next + nb, 0);
  }
}

inline BatchResult batch_compute_bonus(const PhraseBank& bank, double delta, const StateGrid& grid, const TokenMatrix& tokens,
                                       std::optional<TokenId> blank = std::nullopt) {
  BatchWorkspace ws;
  BatchResult out;
  batch_compute_bonus_into(bank, delta, grid, tokens, blank, ws, out);
  return out;
}

/// Batched equivalent of compute_bonus_prefixed; `prefix_bank` may be empty.
inline void batch_forward_prefixed_into(const PhraseBank& bank, const PhraseBank& prefix_bank, double delta, double boost,
                                        const StateGrid& grid, const TokenMatrix& tokens, std::optional<TokenId> blank,
                                        BatchWorkspace& ws, BatchResult& out) {
  detail::check_grid(bank, grid, tokens);
  if (!grid.prefixed) throw ContractError("prefixed batch call needs a grid with prefix tensors");
  if (grid.prefixes != prefix_bank.rows()) throw ContractError("grid prefix columns do not match prefix bank");
  if (grid.prefix_lengths.size() != static_cast<std::size_t>(grid.hyps) * static_cast<std::size_t>(grid.prefixes) ||
      grid.mask.size() != grid.lengths.size()) {
    throw ContractError("prefix tensors do not match grid shape");
  }
  const auto plen = prefix_bank.lengths();
  for (int h = 0; h < grid.hyps; ++h) {
    for (int c = 0; c < grid.prefixes; ++c) {
      const auto v = grid.prefix_lengths[static_cast<std::size_t>(h * grid.prefixes + c)];
      if (v < 0 || v >= plen[static_cast<std::size_t>(c)]) throw StateCorruptionError("prefix grid entry out of range");
    }
  }

  const std::size_t nb = static_cast<std::size_t>(bank.rows());
  const std::size_t nc = static_cast<std::size_t>(prefix_bank.rows());
  const std::size_t nk = static_cast<std::size_t>(tokens.rows);
  const std::size_t nf = static_cast<std::size_t>(tokens.cols);
  const std::size_t lanes = nk * nf * nb;
  const std::size_t prefix_lanes = nk * nf * nc;
  detail::ensure_size(ws.cursor, std::max(lanes, prefix_lanes));
  detail::ensure_size(ws.settled, std::max(lanes, prefix_lanes));
  detail::ensure_size(ws.phrase_q, lanes);
  detail::ensure_size(ws.phrase_full, lanes);
  detail::ensure_size(ws.prefix_q, prefix_lanes);
  detail::ensure_size(ws.prefix_full, prefix_lanes);
  out.next.resize(static_cast<int>(nk * nf), bank.rows(), prefix_bank.rows(), true);
  out.bonus.assign(nk * nf, 0.0);
  out.matched.assign(lanes, 0);

  std::span<std::int32_t> q(ws.phrase_q.data(), lanes);
  std::span<std::uint8_t> full(ws.phrase_full.data(), lanes);
  std::span<std::int32_t> pq(ws.prefix_q.data(), prefix_lanes);
  std::span<std::uint8_t> pfull(ws.prefix_full.data(), prefix_lanes);
  out.loop_iterations = detail::forward_lanes(bank, grid.lengths, tokens, q, full, ws);
  if (nc > 0) out.loop_iterations += detail::forward_lanes(prefix_bank, grid.prefix_lengths, tokens, pq, pfull, ws);

  const auto len = bank.lengths();
  for (std::size_t kf = 0; kf < nk * nf; ++kf) {
    const std::size_t k = kf / nf;
    const std::int32_t* prev = grid.lengths.data() + k * nb;
    const std::uint8_t* prev_mask = grid.mask.data() + k * nb;
    const std::int32_t* prev_prefix = grid.prefix_lengths.data() + k * nc;
    std::int32_t* next = out.next.lengths.data() + kf * nb;
    std::uint8_t* next_mask = out.next.mask.data() + kf * nb;
    std::int32_t* next_prefix = out.next.prefix_lengths.data() + kf * nc;
    if (detail::passes_through(tokens.ids[kf], blank)) {
      std::copy(prev, prev + nb, next);
      std::copy(prev_mask, prev_mask + nb, next_mask);
      std::copy(prev_prefix, prev_prefix + nc, next_prefix);
      continue;
    }
    double before = 0.0;
    double after = 0.0;
    bool any_bias = false;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lane = kf * nb + b;
      const bool f = full[lane] != 0;
      const std::int32_t v = f ? len[b] : q[lane];
      const bool ext = f || q[lane] > prev[b];
      const bool m = prev_mask[b] != 0 && ext;
      before = std::max(before, boosted_score_raw(prev[b], prev_mask[b] != 0, delta, boost));
      after = std::max(after, boosted_score_raw(v, m, delta, boost));
      next[b] = f ? 0 : q[lane];
      // bit 1 of the mask scratch carries ext for the restart pass below
      next_mask[b] = static_cast<std::uint8_t>((m ? 1 : 0) | (ext ? 2 : 0));
      out.matched[lane] = f ? 1 : 0;
      any_bias = any_bias || f;
    }
    out.bonus[kf] = after - before;

    bool any_prefix = false;
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t lane = kf * nc + c;
      const bool f = pfull[lane] != 0;
      next_prefix[c] = f ? 0 : pq[lane];
      any_prefix = any_prefix || f;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const bool ext = (next_mask[b] & 2) != 0;
      const bool restart = any_prefix && !ext;
      next[b] = restart ? 0 : next[b];
      next_mask[b] = restart ? 1 : static_cast<std::uint8_t>(next_mask[b] & 1);
    }
    if (any_bias) {
      std::fill(next_prefix, next_prefix + nc, 0);
      std::fill(next, next + nb, 0);
      std::fill(next_mask, next_mask + nb, 0);
    }
  }
}

inline BatchResult batch_forward_prefixed(const PhraseBank& bank, const PhraseBank& prefix_bank, double delta, double boost,
                                          const StateGrid& grid, const TokenMatrix& tokens,
                                          std::optional<TokenId> blank = std::nullopt) {
  BatchWorkspace ws;
  BatchResult out;
  batch_forward_prefixed_into(bank, prefix_bank, delta, boost, grid, tokens, blank, ws, out);
  return out;
}

}  // namespace kmpbias
