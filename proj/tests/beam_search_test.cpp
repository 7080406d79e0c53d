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

#include "kmpbias/beam_search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "oracle/oracle.hpp"
#include "test_util.hpp"

namespace kmpbias {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class FunctionScorer final : public Scorer {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId>)>;
  FunctionScorer(int vocab, Fn fn, std::optional<TokenId> eos = std::nullopt) : vocab_(vocab), fn_(std::move(fn)), eos_(eos) {}
  int vocab_size() const override { return vocab_; }
  std::vector<double> log_scores(std::span<const TokenId> prefix) const override { return fn_(prefix); }
  std::optional<TokenId> eos_id() const override { return eos_; }

 private:
  int vocab_;
  Fn fn_;
  std::optional<TokenId> eos_;
};

/// Scores that depend on the position and on the previous token, drawn once.
FunctionScorer random_scorer(std::uint64_t seed, int vocab, int positions, std::optional<TokenId> eos = std::nullopt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-6.0, 0.0);
  auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(positions * (vocab + 1) * vocab));
  for (auto& v : *table) v = u(rng);
  return FunctionScorer(
      vocab,
      [table, vocab, positions](std::span<const TokenId> prefix) {
        const int pos = std::min<int>(static_cast<int>(prefix.size()), positions - 1);
        const int prev = prefix.empty() ? vocab : prefix.back();
        const auto* row = table->data() + static_cast<std::size_t>((pos * (vocab + 1) + prev) * vocab);
        return std::vector<double>(row, row + vocab);
      },
      eos);
}

Hypothesis hyp(std::vector<TokenId> tokens, double score) {
  Hypothesis h;
  h.tokens = std::move(tokens);
  h.score = score;
  return h;
}

TEST(Prune, KeepsBestAndBreaksTiesByTokens) {
  const auto out = prune({hyp({2}, 1.0), hyp({0}, 3.0), hyp({1}, 2.0), hyp({0, 1}, 2.0)}, 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].tokens, std::vector<TokenId>{0});
  EXPECT_EQ(out[1].tokens, (std::vector<TokenId>{0, 1}));
  EXPECT_EQ(out[2].tokens, std::vector<TokenId>{1});
}

TEST(Prune, AgreesWithFullSort) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Hypothesis> c;
    const int n = testing::rand_int(rng, 0, 30);
    for (int i = 0; i < n; ++i) c.push_back(hyp(testing::random_tokens(rng, testing::rand_int(rng, 1, 3), 3), testing::rand_int(rng, 0, 5)));
    const auto k = static_cast<std::size_t>(testing::rand_int(rng, 1, 10));
    auto sorted = c;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Hypothesis& a, const Hypothesis& b) {
      return a.score != b.score ? a.score > b.score : a.tokens < b.tokens;
    });
    sorted.resize(std::min(k, sorted.size()));
    const auto got = prune(c, k);
    ASSERT_EQ(got.size(), sorted.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].score, sorted[i].score);
      EXPECT_EQ(got[i].tokens, sorted[i].tokens);
    }
  }
}

TEST(Decode, ZeroDeltaModesAgree) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = random_scorer(seed, 10, 6, TokenId{0});
    const auto ps = PhraseSet::from_tokens({{1, 2}, {3, 4, 5}}, 0.0);
    BeamConfig cfg;
    cfg.beam_size = 4;
    cfg.bias_expansions = 10;
    cfg.max_steps = 6;
    cfg.mode = BiasMode::none;
    const auto base = decode(model, ps, PrefixSet(), cfg);
    for (BiasMode m : {BiasMode::fusion, BiasMode::otf_rescoring}) {
      cfg.mode = m;
      const auto r = decode(model, ps, PrefixSet(), cfg);
      ASSERT_EQ(r.hypotheses.size(), base.hypotheses.size());
      for (std::size_t i = 0; i < r.hypotheses.size(); ++i) {
        EXPECT_EQ(r.hypotheses[i].tokens, base.hypotheses[i].tokens) << to_string(m);
        EXPECT_EQ(r.hypotheses[i].score, base.hypotheses[i].score);
      }
    }
  }
}

// eos=0, x1=1, x2=2, t1=3, t2=4, filler=5
std::vector<double> crafted_scores(std::span<const TokenId> prefix) {
  std::vector<double> s(6, -10.0);
  if (prefix.empty()) {
    s[0] = -kInf;
    s[1] = -1.0;
    s[2] = -1.1;
    s[3] = -2.0;
  } else if (prefix.size() == 1) {
    s[0] = -0.1;
    s[4] = -3.0;
  } else {
    s[0] = 0.0;
  }
  return s;
}

TEST(Decode, FusionRecoversPhraseThatOtfPrunes) {
  const FunctionScorer model(6, crafted_scores, TokenId{0});
  const auto ps = PhraseSet::from_tokens({{3, 4}}, 2.0);
  BeamConfig cfg;
  cfg.beam_size = 2;
  cfg.bias_expansions = 3;
  cfg.max_steps = 5;

  cfg.mode = BiasMode::fusion;
  const auto fusion = decode(model, ps, PrefixSet(), cfg);
  EXPECT_EQ(fusion.best().tokens, (std::vector<TokenId>{3, 4, 0}));
  EXPECT_NEAR(fusion.best().score, -1.0, 1e-12);
  EXPECT_EQ(fusion.best().matched_phrases, std::vector<int>{0});

  cfg.mode = BiasMode::otf_rescoring;
  const auto otf = decode(model, ps, PrefixSet(), cfg);
  EXPECT_EQ(otf.best().tokens, (std::vector<TokenId>{1, 0}));
  EXPECT_TRUE(otf.best().matched_phrases.empty());
  EXPECT_FALSE(otf.truncated);
}

TEST(Decode, NoiselessPhraseRaisesTopScoreByDeltaTimesLength) {
  // The model already prefers the reference 5 6 7 8 then eos.
  const std::vector<TokenId> ref{5, 6, 7, 8, 0};
  const FunctionScorer model(
      10,
      [&](std::span<const TokenId> prefix) {
        std::vector<double> s(10, -9.0);
        s[static_cast<std::size_t>(ref[std::min(prefix.size(), ref.size() - 1)])] = -0.01;
        return s;
      },
      TokenId{0});
  BeamConfig cfg;
  cfg.beam_size = 3;
  cfg.bias_expansions = 4;
  cfg.mode = BiasMode::none;
  const auto base = decode(model, PhraseSet::from_tokens({{6, 7, 8}}, 0.0), PrefixSet(), cfg);
  for (BiasMode m : {BiasMode::fusion, BiasMode::otf_rescoring}) {
    cfg.mode = m;
    const auto r = decode(model, PhraseSet::from_tokens({{6, 7, 8}}, 0.5), PrefixSet(), cfg);
    EXPECT_EQ(r.best().tokens, base.best().tokens);
    EXPECT_NEAR(r.best().score - base.best().score, 0.5 * 3, 1e-9);
  }
}

TEST(Decode, BonusCallsPerStep) {
  const auto model = random_scorer(7, 12, 8);
  const auto ps = PhraseSet::from_tokens({{1, 2}, {3}}, 1.0);
  BeamConfig cfg;
  cfg.beam_size = 4;
  cfg.bias_expansions = 6;
  cfg.max_steps = 5;
  cfg.mode = BiasMode::fusion;
  auto r = decode(model, ps, PrefixSet(), cfg);
  for (const auto& s : r.steps) EXPECT_EQ(s.bonus_calls, static_cast<std::size_t>(s.live_hypotheses * 6));
  EXPECT_EQ(r.steps.back().live_hypotheses, 4);

  cfg.mode = BiasMode::otf_rescoring;
  r = decode(model, ps, PrefixSet(), cfg);
  for (const auto& s : r.steps) EXPECT_EQ(s.bonus_calls, 4u);
}

struct Replayed {
  double model = 0.0;
  oracle::Replay bias;
};

Replayed replay(const Scorer& model, const Hypothesis& h, const PhraseSet& ps, const std::vector<std::vector<TokenId>>& prefixes,
                double lambda, std::optional<TokenId> blank) {
  Replayed out;
  for (std::size_t t = 0; t < h.tokens.size(); ++t) {
    const auto s = model.log_scores(std::span<const TokenId>(h.tokens.data(), t));
    out.model += s[static_cast<std::size_t>(h.tokens[t])];
  }
  std::vector<std::vector<TokenId>> phrases;
  for (const auto& p : ps.patterns()) phrases.push_back(p.tokens());
  out.bias = oracle::replay_bonus(phrases, prefixes, ps.delta(), lambda, h.tokens, blank ? &*blank : nullptr);
  return out;
}

TEST(Decode, ScoresAndStatesReplayFromTokens) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 40; ++trial) {
    const int vocab = 9;
    const TokenId blank = 8;
    const auto model = random_scorer(100 + static_cast<std::uint64_t>(trial), vocab, 8, TokenId{0});
    const auto phrases = testing::random_phrases(rng, 6, 3, 4, 1);
    const std::vector<std::vector<TokenId>> prefixes{{5}, {6, 7}};
    const bool with_prefix = trial % 2 == 1;
    const auto ps = PhraseSet::from_tokens(phrases, 1.5);
    const auto pfx = with_prefix ? PrefixSet::from_tokens(prefixes, 2.0) : PrefixSet();
    for (BiasMode m : {BiasMode::fusion, BiasMode::otf_rescoring}) {
      BeamConfig cfg;
      cfg.beam_size = 4;
      cfg.bias_expansions = 5;
      cfg.max_steps = 7;
      cfg.mode = m;
      cfg.blank_id = blank;
      const auto r = decode(model, ps, pfx, cfg);
      for (const auto& h : r.hypotheses) {
        const auto want = replay(model, h, ps, with_prefix ? prefixes : std::vector<std::vector<TokenId>>{}, 2.0, blank);
        EXPECT_NEAR(h.model_score, want.model, 1e-9);
        EXPECT_NEAR(h.bonus_total, want.bias.total_bonus, 1e-9);
        EXPECT_NEAR(h.score, h.model_score + h.bonus_total, 1e-9);
        std::vector<int> matched;
        for (const auto& step : want.bias.matches_per_step) matched.insert(matched.end(), step.begin(), step.end());
        EXPECT_EQ(h.matched_phrases, matched);
        EXPECT_EQ(h.bias_state.phrase_lengths, want.bias.state.phrase);
        if (with_prefix) {
          EXPECT_EQ(h.bias_state.prefix_lengths, want.bias.state.prefix);
          EXPECT_EQ(h.bias_state.prefix_mask, want.bias.state.mask);
        }
      }
    }
  }
}

TEST(Decode, ScalarAndBatchEnginesGiveIdenticalResults) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_scorer(200 + static_cast<std::uint64_t>(trial), 10, 8, TokenId{0});
    const auto ps = PhraseSet::from_tokens(testing::random_phrases(rng, 12, 3, 5, 1), 1.2);
    const auto pfx = trial % 2 ? PrefixSet::from_tokens({{6}, {7, 8}}, 1.5) : PrefixSet();
    for (BiasMode m : {BiasMode::fusion, BiasMode::otf_rescoring}) {
      BeamConfig cfg;
      cfg.beam_size = 5;
      cfg.bias_expansions = 6;
      cfg.max_steps = 8;
      cfg.mode = m;
      cfg.blank_id = TokenId{9};
      cfg.engine = EngineKind::scalar;
      const auto a = decode(model, ps, pfx, cfg);
      cfg.engine = EngineKind::batch;
      const auto b = decode(model, ps, pfx, cfg);
      ASSERT_EQ(a.hypotheses.size(), b.hypotheses.size());
      for (std::size_t i = 0; i < a.hypotheses.size(); ++i) {
        EXPECT_EQ(a.hypotheses[i].tokens, b.hypotheses[i].tokens);
        EXPECT_EQ(a.hypotheses[i].score, b.hypotheses[i].score);
        EXPECT_EQ(a.hypotheses[i].bias_state, b.hypotheses[i].bias_state);
        EXPECT_EQ(a.hypotheses[i].matched_phrases, b.hypotheses[i].matched_phrases);
      }
    }
  }
}

TEST(Decode, BlankBetweenPhraseTokensKeepsMatching) {
  // blank=9 is the model's favourite between the two phrase tokens.
  const std::vector<TokenId> path{3, 9, 4, 0};
  const FunctionScorer model(
      10,
      [&](std::span<const TokenId> prefix) {
        std::vector<double> s(10, -8.0);
        s[static_cast<std::size_t>(path[std::min(prefix.size(), path.size() - 1)])] = -0.1;
        return s;
      },
      TokenId{0});
  BeamConfig cfg;
  cfg.beam_size = 2;
  cfg.bias_expansions = 2;
  cfg.blank_id = TokenId{9};
  const auto r = decode(model, PhraseSet::from_tokens({{3, 4}}, 1.0), PrefixSet(), cfg);
  EXPECT_EQ(r.best().tokens, path);
  EXPECT_EQ(r.best().matched_phrases, std::vector<int>{0});
  EXPECT_NEAR(r.best().bonus_total, 2.0, 1e-12);
}

TEST(Decode, ContractAndFeasibilityErrors) {
  const auto model = random_scorer(3, 6, 4);
  const auto ps = PhraseSet::from_tokens({{1}}, 1.0);
  BeamConfig cfg;
  cfg.mode = BiasMode::fusion;
  cfg.bias_expansions = 0;
  EXPECT_THROW(decode(model, ps, PrefixSet(), cfg), ContractError);
  cfg.bias_expansions = 7;
  EXPECT_THROW(decode(model, ps, PrefixSet(), cfg), ContractError);
  cfg.bias_expansions = 3;
  EXPECT_THROW(decode(model, nullptr, cfg), ContractError);
  cfg.beam_size = 0;
  EXPECT_THROW(decode(model, ps, PrefixSet(), cfg), ContractError);

  const FunctionScorer dead(4, [](std::span<const TokenId>) { return std::vector<double>(4, -kInf); });
  BeamConfig ok;
  ok.bias_expansions = 2;
  EXPECT_THROW(decode(dead, ps, PrefixSet(), ok), DecodeError);
}

TEST(Decode, TruncationFlag) {
  const auto with_eos = random_scorer(4, 6, 4, TokenId{0});
  const FunctionScorer never_ends(4, [](std::span<const TokenId>) { return std::vector<double>{-kInf, -1.0, -2.0, -3.0}; },
                                  TokenId{0});
  BeamConfig cfg;
  cfg.mode = BiasMode::none;
  cfg.beam_size = 2;
  cfg.max_steps = 3;
  EXPECT_TRUE(decode(never_ends, nullptr, cfg).truncated);
  const auto no_eos = random_scorer(4, 6, 4);
  EXPECT_FALSE(decode(no_eos, nullptr, cfg).truncated);
  cfg.max_steps = 40;
  const auto r = decode(with_eos, nullptr, cfg);
  for (const auto& h : r.hypotheses) EXPECT_TRUE(h.terminated || r.truncated);
}

TEST(Decode, ParseMode) {
  EXPECT_EQ(parse_bias_mode("otf"), BiasMode::otf_rescoring);
  EXPECT_EQ(parse_bias_mode("fusion"), BiasMode::fusion);
  EXPECT_EQ(parse_bias_mode("none"), BiasMode::none);
  EXPECT_THROW(parse_bias_mode("shallow"), ContractError);
}

}  // namespace
}  // namespace kmpbias
