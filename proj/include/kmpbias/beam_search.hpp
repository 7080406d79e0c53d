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
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/engine.hpp"
#include "kmpbias/error.hpp"

namespace kmpbias {

/// Next-token model queried by the decoder.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual int vocab_size() const = 0;
  /// Log-scores for every token given the hypothesis so far (blank tokens
  /// included in `prefix`). At least one entry must be finite.
  virtual std::vector<double> log_scores(std::span<const TokenId> prefix) const = 0;
  /// Token that terminates a hypothesis, if any.
  virtual std::optional<TokenId> eos_id() const { return std::nullopt; }
};

enum class BiasMode { none, fusion, otf_rescoring };

inline std::string to_string(BiasMode m) {
  switch (m) {
    case BiasMode::none: return "none";
    case BiasMode::fusion: return "fusion";
    case BiasMode::otf_rescoring: return "otf";
  }
  return "?";
}

inline BiasMode parse_bias_mode(const std::string& s) {
  if (s == "none") return BiasMode::none;
  if (s == "fusion") return BiasMode::fusion;
  if (s == "otf" || s == "otf_rescoring") return BiasMode::otf_rescoring;
  throw ContractError("unknown mode '" + s + "' (expected none, fusion or otf)");
}

struct BeamConfig {
  int beam_size = 8;
  int bias_expansions = 50;
  BiasMode mode = BiasMode::fusion;
  EngineKind engine = EngineKind::scalar;
  std::optional<TokenId> blank_id;
  int max_steps = 64;
};

struct Hypothesis {
  std::vector<TokenId> tokens;
  double score = 0.0;        // model_score + bonus_total, accumulated step by step
  double model_score = 0.0;
  double bonus_total = 0.0;
  PrefixedMatchState bias_state;
  std::vector<int> matched_phrases;  // in match order
  bool terminated = false;
};

struct StepStats {
  int live_hypotheses = 0;   // hypotheses expanded this step
  int candidates = 0;        // candidates entering pruning
  std::size_t bonus_calls = 0;
};

struct DecodeResult {
  std::vector<Hypothesis> hypotheses;  // best first
  bool truncated = false;
  std::vector<StepStats> steps;

  const Hypothesis& best() const { return hypotheses.front(); }
};

/// Best `k` by score; equal scores rank by ascending token sequence.
inline std::vector<Hypothesis> prune(std::vector<Hypothesis> candidates, std::size_t k) {
  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), better);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), better);
  }
  return candidates;
}

namespace detail {

// Top `n` finite entries by score (ties by token id), optionally skipping one token.
inline std::vector<TokenId> top_tokens(const std::vector<double>& scores, std::size_t n, std::optional<TokenId> exclude) {
  std::vector<TokenId> ids;
  ids.reserve(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const auto id = static_cast<TokenId>(t);
    if (exclude && id == *exclude) continue;
    if (std::isfinite(scores[t])) ids.push_back(id);
  }
  auto better = [&](TokenId a, TokenId b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  if (ids.size() > n) {
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), better);
    ids.resize(n);
  } else {
    std::sort(ids.begin(), ids.end(), better);
  }
  return ids;
}

struct Candidate {
  std::size_t parent = 0;
  TokenId token = 0;
  double model_score = 0.0;
};

}  // namespace detail

/// Label-synchronous beam search, one token per step.
///
/// fusion: every live hypothesis proposes its top-F non-blank tokens (plus
/// blank, when configured); the bonus of each proposal is added before
/// pruning. otf_rescoring: proposals are pruned on model score alone and the
/// bonus of each survivor's new token is folded in afterwards. none: no bias
/// state is tracked. Blank tokens never touch the bias state.
inline DecodeResult decode(const Scorer& model, BiasEngine* engine, const BeamConfig& cfg) {
  if (cfg.beam_size < 1) throw ContractError("beam size must be >= 1");
  if (cfg.max_steps < 1) throw ContractError("max_steps must be >= 1");
  const int vocab = model.vocab_size();
  if (cfg.mode == BiasMode::fusion && (cfg.bias_expansions < 1 || cfg.bias_expansions > vocab)) {
    throw ContractError("fusion needs 1 <= F <= vocab_size");
  }
  if (cfg.mode != BiasMode::none && engine == nullptr) throw ContractError("biased decoding needs an engine");
  if (engine && engine->blank() != cfg.blank_id) throw ContractError("engine and config disagree on the blank id");

  const bool biased = cfg.mode != BiasMode::none;
  const auto eos = model.eos_id();

  DecodeResult result;
  Hypothesis root;
  if (biased) root.bias_state = engine->initial_state();
  std::vector<Hypothesis> beam{std::move(root)};
  std::vector<ExpansionScore> scored;

  for (int step = 0; step < cfg.max_steps; ++step) {
    std::vector<std::size_t> live;
    for (std::size_t h = 0; h < beam.size(); ++h) {
      if (!beam[h].terminated) live.push_back(h);
    }
    if (live.empty()) break;

    StepStats stats;
    stats.live_hypotheses = static_cast<int>(live.size());
    const std::size_t calls_before = engine ? engine->bonus_calls() : 0;

    const std::size_t per_hyp = cfg.mode == BiasMode::fusion ? static_cast<std::size_t>(cfg.bias_expansions)
                                                             : static_cast<std::size_t>(cfg.beam_size);
    std::size_t width = 0;
    std::vector<std::vector<detail::Candidate>> rows(live.size());
    for (std::size_t r = 0; r < live.size(); ++r) {
      const Hypothesis& h = beam[live[r]];
      const auto scores = model.log_scores(h.tokens);
      if (scores.size() != static_cast<std::size_t>(vocab)) throw DecodeError("scorer returned wrong number of log-scores");
      if (std::none_of(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); })) {
        throw DecodeError("scorer returned no feasible token");
      }
      std::vector<TokenId> picks;
      if (cfg.mode == BiasMode::fusion) {
        picks = detail::top_tokens(scores, per_hyp, cfg.blank_id);
        if (cfg.blank_id && *cfg.blank_id < vocab && std::isfinite(scores[static_cast<std::size_t>(*cfg.blank_id)])) {
          picks.push_back(*cfg.blank_id);
        }
      } else {
        picks = detail::top_tokens(scores, per_hyp, std::nullopt);
      }
      for (TokenId t : picks) rows[r].push_back({live[r], t, scores[static_cast<std::size_t>(t)]});
      width = std::max(width, picks.size());
    }

    std::vector<Hypothesis> candidates;
    for (const auto& h : beam) {
      if (h.terminated) candidates.push_back(h);
    }

    auto extend = [&](const detail::Candidate& c) {
      const Hypothesis& parent = beam[c.parent];
      Hypothesis child;
      child.tokens = parent.tokens;
      child.tokens.push_back(c.token);
      child.model_score = parent.model_score + c.model_score;
      child.bonus_total = parent.bonus_total;
      child.score = parent.score + c.model_score;
      child.bias_state = parent.bias_state;
      child.matched_phrases = parent.matched_phrases;
      child.terminated = eos && c.token == *eos;
      return child;
    };

    if (cfg.mode == BiasMode::fusion) {
      TokenMatrix grid = TokenMatrix::filled(static_cast<int>(live.size()), static_cast<int>(width), kSkipToken);
      std::vector<const PrefixedMatchState*> parents;
      for (std::size_t r = 0; r < live.size(); ++r) {
        parents.push_back(&beam[live[r]].bias_state);
        for (std::size_t f = 0; f < rows[r].size(); ++f) grid.at(static_cast<int>(r), static_cast<int>(f)) = rows[r][f].token;
      }
      engine->score(parents, grid, scored);
      for (std::size_t r = 0; r < live.size(); ++r) {
        for (std::size_t f = 0; f < rows[r].size(); ++f) {
          Hypothesis child = extend(rows[r][f]);
          auto& s = scored[r * width + f];
          child.score += s.bonus;
          child.bonus_total += s.bonus;
          child.bias_state = std::move(s.state);
          child.matched_phrases.insert(child.matched_phrases.end(), s.matched_phrase_indices.begin(), s.matched_phrase_indices.end());
          candidates.push_back(std::move(child));
        }
      }
    } else {
      for (const auto& row : rows) {
        for (const auto& c : row) candidates.push_back(extend(c));
      }
    }

    stats.candidates = static_cast<int>(candidates.size());
    beam = prune(std::move(candidates), static_cast<std::size_t>(cfg.beam_size));

    if (cfg.mode == BiasMode::otf_rescoring) {
      // Survivors extended this step are exactly those of length step + 1.
      std::vector<std::size_t> fresh_idx;
      for (std::size_t h = 0; h < beam.size(); ++h) {
        if (beam[h].tokens.size() == static_cast<std::size_t>(step) + 1) fresh_idx.push_back(h);
      }
      if (!fresh_idx.empty()) {
        TokenMatrix grid = TokenMatrix::filled(static_cast<int>(fresh_idx.size()), 1, kSkipToken);
        std::vector<const PrefixedMatchState*> parents;
        for (std::size_t i = 0; i < fresh_idx.size(); ++i) {
          parents.push_back(&beam[fresh_idx[i]].bias_state);
          grid.at(static_cast<int>(i), 0) = beam[fresh_idx[i]].tokens.back();
        }
        engine->score(parents, grid, scored);
        for (std::size_t i = 0; i < fresh_idx.size(); ++i) {
          Hypothesis& h = beam[fresh_idx[i]];
          auto& s = scored[i];
          h.score += s.bonus;
          h.bonus_total += s.bonus;
          h.bias_state = std::move(s.state);
          h.matched_phrases.insert(h.matched_phrases.end(), s.matched_phrase_indices.begin(), s.matched_phrase_indices.end());
        }
      }
    }

    stats.bonus_calls = engine ? engine->bonus_calls() - calls_before : 0;
    result.steps.push_back(stats);
  }

  // Without an end token every hypothesis runs to max_steps by construction.
  result.truncated = eos && std::any_of(beam.begin(), beam.end(), [](const Hypothesis& h) { return !h.terminated; });
  result.hypotheses = prune(std::move(beam), static_cast<std::size_t>(cfg.beam_size));
  return result;
}

/// Convenience overload building the engine from the configuration.
inline DecodeResult decode(const Scorer& model, const PhraseSet& phrases, const PrefixSet& prefixes, const BeamConfig& cfg) {
  if (cfg.mode == BiasMode::none) return decode(model, nullptr, cfg);
  auto engine = make_engine(cfg.engine, phrases, prefixes, cfg.blank_id, model.vocab_size());
  return decode(model, engine.get(), cfg);
}

}  // namespace kmpbias
