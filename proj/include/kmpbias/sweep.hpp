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
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "kmpbias/beam_search.hpp"
#include "kmpbias/metrics.hpp"
#include "kmpbias/testset.hpp"

namespace kmpbias {

struct DecodeOptions {
  BeamConfig beam;
  double delta = 0.0;
  double boost = 1.0;                                // lambda, used only with prefixes
  std::vector<std::vector<TokenId>> prefixes;        // empty: no prefix boosting
  std::optional<std::vector<std::vector<TokenId>>> phrase_override;
};

struct UtteranceOutcome {
  std::vector<TokenId> hypothesis;  // best hypothesis without end token or blanks
  double score = 0.0;
  std::vector<int> matched;
  WerResult wer;
  bool entity_hit = false;        // from the matcher's completed-phrase indices
  bool entity_substring = false;  // entity found by plain substring search
  bool truncated = false;
};

inline std::vector<TokenId> strip_specials(const std::vector<TokenId>& tokens, std::optional<TokenId> blank) {
  std::vector<TokenId> out;
  for (TokenId t : tokens) {
    if (t == SimLayout::kEos || (blank && t == *blank)) continue;
    out.push_back(t);
  }
  return out;
}

inline UtteranceOutcome decode_utterance(const UtteranceSpec& spec, const DecodeOptions& opt, const SimLayout& layout) {
  const auto channel = spec.channel(layout);
  const auto& phrase_tokens = opt.phrase_override ? *opt.phrase_override : spec.phrases;
  const auto phrases = PhraseSet::from_tokens(phrase_tokens, opt.delta);
  const auto prefixes = opt.prefixes.empty() ? PrefixSet() : PrefixSet::from_tokens(opt.prefixes, opt.boost);
  const auto result = decode(channel, phrases, prefixes, opt.beam);

  UtteranceOutcome out;
  const auto& best = result.best();
  out.hypothesis = strip_specials(best.tokens, opt.beam.blank_id);
  out.score = best.score;
  out.matched = best.matched_phrases;
  if (opt.beam.mode == BiasMode::none) {
    // No bias state was tracked; replay the matcher over the winning tokens.
    auto st = MatchState::initial(phrases);
    for (TokenId t : best.tokens) {
      if (opt.beam.blank_id && t == *opt.beam.blank_id) continue;
      auto r = compute_bonus(phrases, st, t);
      out.matched.insert(out.matched.end(), r.matched_phrase_indices.begin(), r.matched_phrase_indices.end());
      st = std::move(r.new_state);
    }
  }
  out.truncated = result.truncated;
  out.wer = word_error_rate(out.hypothesis, spec.reference);
  if (spec.in_domain() && !opt.phrase_override) {
    // Index of the entity after deduplication.
    const auto& e = spec.phrases[static_cast<std::size_t>(spec.entity)];
    int entity = -1;
    for (int b = 0; b < phrases.size() && entity < 0; ++b) {
      if (phrases[static_cast<std::size_t>(b)].tokens() == e) entity = b;
    }
    out.entity_hit = std::find(out.matched.begin(), out.matched.end(), entity) != out.matched.end();
    out.entity_substring = std::search(out.hypothesis.begin(), out.hypothesis.end(), e.begin(), e.end()) != out.hypothesis.end();
  }
  return out;
}

struct SetMetrics {
  int utterances = 0;
  std::size_t edits = 0;
  std::size_t ref_tokens = 0;
  double wer = 0.0;            // corpus level: total edits / total reference tokens
  double entity_recall = NAN;  // NaN when the set has no in-domain utterance
  int recall_disagreements = 0;
};

inline SetMetrics evaluate(const std::vector<UtteranceSpec>& specs, const DecodeOptions& opt, const SimLayout& layout) {
  SetMetrics m;
  int in_domain = 0;
  int hits = 0;
  for (const auto& s : specs) {
    const auto o = decode_utterance(s, opt, layout);
    ++m.utterances;
    m.edits += o.wer.edits;
    m.ref_tokens += o.wer.ref_length;
    if (s.in_domain()) {
      ++in_domain;
      hits += o.entity_hit ? 1 : 0;
      m.recall_disagreements += o.entity_hit != o.entity_substring ? 1 : 0;
    }
  }
  m.wer = m.ref_tokens ? static_cast<double>(m.edits) / static_cast<double>(m.ref_tokens) : 0.0;
  if (in_domain) m.entity_recall = static_cast<double>(hits) / in_domain;
  return m;
}

struct NamedSet {
  std::string name;
  std::vector<UtteranceSpec> specs;
};

struct ModeSpec {
  BiasMode mode = BiasMode::fusion;
  int expansions = 50;  // F, fusion only
};

struct SweepConfig {
  std::vector<ModeSpec> modes{{BiasMode::fusion, 50}, {BiasMode::otf_rescoring, 0}};
  BeamConfig beam;
  double boost = 1.0;
  std::vector<std::vector<TokenId>> prefixes;
  SimLayout layout;
  bool include_baseline = true;  // one mode=none row per set
  unsigned threads = 0;          // 0: hardware concurrency
};

struct SweepRow {
  std::string set;
  int phrases = 0;  // B
  std::string mode;
  int expansions = 0;  // F (0 when unused)
  double delta = 0.0;
  double boost = 1.0;
  double wer = 0.0;
  double entity_recall = NAN;

  auto key() const { return std::tie(set, phrases, mode, expansions, delta, boost); }
};

inline constexpr std::string_view kAverageSetName = "avg_anti_with_prefix";

/// Runs every (set, mode, delta) cell in parallel and returns rows sorted by
/// (set, B, mode, F, delta, lambda). When both an anti and a with_prefix set
/// are present, averaged rows named avg_anti_with_prefix are added.
inline std::vector<SweepRow> sweep_delta(const std::vector<NamedSet>& sets, const std::vector<double>& deltas, const SweepConfig& cfg) {
  if (deltas.empty()) throw ContractError("delta grid must not be empty");
  struct Cell {
    std::size_t set;
    BiasMode mode;
    int expansions;
    double delta;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (cfg.include_baseline) cells.push_back({s, BiasMode::none, 0, 0.0});
    for (const auto& m : cfg.modes) {
      for (double d : deltas) cells.push_back({s, m.mode, m.mode == BiasMode::fusion ? m.expansions : 0, d});
    }
  }

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      DecodeOptions opt;
      opt.beam = cfg.beam;
      opt.beam.mode = c.mode;
      if (c.mode == BiasMode::fusion) opt.beam.bias_expansions = c.expansions;
      opt.delta = c.delta;
      opt.boost = cfg.boost;
      opt.prefixes = cfg.prefixes;
      const auto& set = sets[c.set];
      const auto m = evaluate(set.specs, opt, cfg.layout);
      auto& r = rows[i];
      r.set = set.name;
      r.phrases = set.specs.empty() ? 0 : static_cast<int>(set.specs.front().phrases.size());
      r.mode = to_string(c.mode);
      r.expansions = c.expansions;
      r.delta = c.delta;
      r.boost = cfg.prefixes.empty() || c.mode == BiasMode::none ? 1.0 : cfg.boost;
      r.wer = m.wer;
      r.entity_recall = m.entity_recall;
    }
  };
  unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(cells.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }

  // Averages over the anti and with_prefix sets, matched on (mode, F, delta, lambda).
  std::vector<std::size_t> anti_sets, prefix_sets;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (sets[s].specs.empty()) continue;
    if (sets[s].specs.front().domain == Domain::anti) anti_sets.push_back(s);
    if (sets[s].specs.front().domain == Domain::with_prefix) prefix_sets.push_back(s);
  }
  if (!anti_sets.empty() && !prefix_sets.empty()) {
    std::map<std::tuple<std::string, int, double, double>, std::vector<const SweepRow*>> groups;
    std::map<std::tuple<std::string, int, double, double>, const SweepRow*> recall_source;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& dom = sets[cells[i].set].specs;
      if (dom.empty()) continue;
      const auto d = dom.front().domain;
      if (d != Domain::anti && d != Domain::with_prefix) continue;
      const auto key = std::make_tuple(rows[i].mode, rows[i].expansions, rows[i].delta, rows[i].boost);
      groups[key].push_back(&rows[i]);
      if (d == Domain::with_prefix) recall_source[key] = &rows[i];
    }
    for (const auto& [key, members] : groups) {
      SweepRow avg;
      avg.set = std::string(kAverageSetName);
      avg.phrases = recall_source.count(key) ? recall_source[key]->phrases : members.front()->phrases;
      std::tie(avg.mode, avg.expansions, avg.delta, avg.boost) = key;
      double sum = 0.0;
      for (const auto* r : members) sum += r->wer;
      avg.wer = sum / static_cast<double>(members.size());
      if (recall_source.count(key)) avg.entity_recall = recall_source[key]->entity_recall;
      rows.push_back(avg);
    }
  }

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.key() < b.key(); });
  return rows;
}

inline constexpr std::string_view kSweepCsvHeader = "set,B,mode,F,delta,lambda,wer,entity_recall";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    out << r.set << ',' << r.phrases << ',' << r.mode << ',' << r.expansions << ',';
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6f,", r.delta, r.boost, r.wer);
    out << buf;
    if (std::isnan(r.entity_recall)) {
      out << "nan";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", r.entity_recall);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace kmpbias
