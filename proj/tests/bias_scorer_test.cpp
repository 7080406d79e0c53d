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

#include "kmpbias/bias_scorer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <optional>
#include <random>
#include <vector>

#include "oracle/oracle.hpp"
#include "test_util.hpp"

namespace kmpbias {
namespace {

enum : TokenId { a = 0, b = 1, c = 2, d = 3 };

TEST(Score, LinearInLength) {
  const auto ps = PhraseSet::from_tokens({{a, b, c, d, a}}, 2.3);
  EXPECT_DOUBLE_EQ(score(ps, 0), 0.0);
  EXPECT_DOUBLE_EQ(score(ps, 4), 9.2);
  const auto off = ps.with_delta(0.0);
  for (int len = 0; len <= 5; ++len) EXPECT_EQ(score(off, len), 0.0);
}

TEST(Potential, MaxOverPhrases) {
  const auto ps = PhraseSet::from_tokens({{a, b, c, d, a}, {b, b, c, d, d}}, 1.0);
  EXPECT_EQ(potential(ps, MatchState::initial(ps)), 0.0);
  EXPECT_EQ(potential(ps, MatchState{{1, 3}}), 3.0);
}

TEST(Potential, OverrideCarriesFullMatchLength) {
  const auto ps = PhraseSet::from_tokens({{a, b, c, d, a}, {b, b, c}}, 1.0);
  const std::vector<std::optional<int>> override{5, std::nullopt};
  EXPECT_EQ(potential(ps, MatchState{{2, 0}}, std::span<const std::optional<int>>(override)), 5.0);
}

TEST(ComputeBonus, AdvanceThenComplete) {
  const auto ps = PhraseSet::from_tokens({{a, b}, {b, c}}, 1.0);
  auto r = compute_bonus(ps, MatchState{{0, 0}}, a);
  EXPECT_EQ(r.new_state, (MatchState{{1, 0}}));
  EXPECT_EQ(r.bonus, 1.0);
  EXPECT_TRUE(r.matched_phrase_indices.empty());

  r = compute_bonus(ps, r.new_state, b);
  EXPECT_EQ(r.bonus, 1.0);
  EXPECT_EQ(r.new_state, (MatchState{{0, 0}}));
  EXPECT_EQ(r.matched_phrase_indices, std::vector<int>{0});
}

TEST(ComputeBonus, MismatchCancelsPartialCredit) {
  const auto ps = PhraseSet::from_tokens({{a, b}}, 1.0);
  const auto r = compute_bonus(ps, MatchState{{1}}, c);
  EXPECT_EQ(r.new_state, (MatchState{{0}}));
  EXPECT_EQ(r.bonus, -1.0);
}

TEST(ComputeBonus, InvalidStateIsRejected) {
  const auto ps = PhraseSet::from_tokens({{a, b}}, 1.0);
  EXPECT_THROW(compute_bonus(ps, MatchState{{2}}, a), StateCorruptionError);
  EXPECT_THROW(compute_bonus(ps, MatchState{{0, 0}}, a), StateCorruptionError);
}

TEST(PhraseSet, DeduplicatesAndTracksGammaBar) {
  const auto ps = PhraseSet::from_tokens({{a, b}, {a, b, a, c, a, b, a, b, a}, {a, b}}, 1.0);
  EXPECT_EQ(ps.size(), 2);
  EXPECT_EQ(ps.duplicates(), 1);
  EXPECT_EQ(ps.gamma_bar(), 3);
  EXPECT_EQ(ps.max_length(), 9);
}

TEST(PhraseSet, RejectsEmptyAndNegativeDelta) {
  EXPECT_THROW(PhraseSet({}, 1.0), ContractError);
  EXPECT_THROW(PhraseSet::from_tokens({{a}}, -0.5), ContractError);
  EXPECT_THROW(PhraseSet::from_tokens({{}}, 1.0), InvalidPatternError);
}

TEST(ComputeBonus, SharedPrefixTakesMaxNotSum) {
  const auto ps = PhraseSet::from_tokens({{a, b, c}, {a, b, d}}, 1.5);
  auto r = compute_bonus(ps, MatchState::initial(ps), a);
  EXPECT_DOUBLE_EQ(r.bonus, 1.5);
  r = compute_bonus(ps, r.new_state, b);
  EXPECT_DOUBLE_EQ(r.bonus, 1.5);
  EXPECT_EQ(r.new_state, (MatchState{{2, 2}}));
}

TEST(ComputeBonus, FullPhraseCreditAndNestedPreemption) {
  // The shorter phrase completes first and resets the longer one.
  const auto ps = PhraseSet::from_tokens({{a, b, c}, {b}}, 1.0);
  auto r = compute_bonus(ps, MatchState::initial(ps), a);
  r = compute_bonus(ps, r.new_state, b);
  EXPECT_EQ(r.matched_phrase_indices, std::vector<int>{1});
  EXPECT_EQ(r.new_state, (MatchState{{0, 0}}));
  // mu(v) uses v = (2, 1): the longer phrase's progress still counts at the completion step.
  EXPECT_EQ(r.bonus, 1.0);
}

struct StreamCase {
  std::vector<std::vector<TokenId>> phrases;
  std::vector<TokenId> stream;
  double delta;
};

StreamCase random_case(std::mt19937_64& rng) {
  StreamCase sc;
  const int alphabet = testing::rand_int(rng, 2, 5);
  sc.phrases = testing::random_phrases(rng, testing::rand_int(rng, 1, 6), 5, alphabet);
  sc.stream = testing::random_stream(rng, sc.phrases, testing::rand_int(rng, 0, 12), alphabet + 1);
  sc.delta = 0.25 * testing::rand_int(rng, 0, 12);
  return sc;
}

TEST(ComputeBonus, TelescopesAgainstReplay) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto sc = random_case(rng);
    const auto ps = PhraseSet::from_tokens(sc.phrases, sc.delta);
    // Work with the deduplicated phrase list so indices line up with the oracle.
    std::vector<std::vector<TokenId>> unique;
    for (const auto& p : ps.patterns()) unique.push_back(p.tokens());
    const auto truth = oracle::replay_bonus(unique, {}, sc.delta, 1.0, sc.stream);

    MatchState st = MatchState::initial(ps);
    std::vector<int> lens(unique.size(), 0);  // tracked by definition, not by the matcher
    double sum = 0.0;
    double completed = 0.0;
    for (std::size_t t = 0; t < sc.stream.size(); ++t) {
      const auto r = compute_bonus(ps, st, sc.stream[t]);
      ASSERT_NEAR(r.bonus, truth.bonuses[t], 1e-12);
      ASSERT_EQ(r.matched_phrase_indices, truth.matches_per_step[t]);
      sum += r.bonus;
      int credit = 0;
      bool full = false;
      for (std::size_t i = 0; i < unique.size(); ++i) {
        const auto s = oracle::step_by_definition(unique[i], lens[i], sc.stream[t]);
        lens[i] = s.length;
        credit = std::max(credit, s.full ? static_cast<int>(unique[i].size()) : s.length);
        full = full || s.full;
      }
      if (full) {
        // Completion is credited with the longest progress at that step, which
        // is the completed phrase's length unless a longer phrase was further along.
        completed += sc.delta * credit;
        std::fill(lens.begin(), lens.end(), 0);
      }
      st = r.new_state;
      ASSERT_NEAR(sum, potential(ps, st) + completed, 1e-9);
    }
    EXPECT_EQ(st.lengths, truth.state.phrase);
    EXPECT_NEAR(sum, truth.total_bonus, 1e-9);
  }
}

TEST(ComputeBonus, FullPhraseStreamEarnsDeltaTimesLength) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const auto sc = random_case(rng);
    const auto ps = PhraseSet::from_tokens(sc.phrases, sc.delta);
    const auto& target = ps[static_cast<std::size_t>(testing::rand_int(rng, 0, ps.size() - 1))];
    MatchState st = MatchState::initial(ps);
    double sum = 0.0;
    bool early = false;
    for (std::size_t t = 0; t < target.tokens().size(); ++t) {
      const auto r = compute_bonus(ps, st, target.tokens()[t]);
      sum += r.bonus;
      st = r.new_state;
      if (!r.matched_phrase_indices.empty() && t + 1 < target.tokens().size()) early = true;
    }
    // A shorter phrase inside the target can complete first and reset matching.
    if (early) continue;
    EXPECT_NEAR(sum, sc.delta * target.size(), 1e-9);
    EXPECT_EQ(st, MatchState::initial(ps));
  }
}

TEST(ComputeBonus, CancellationWithoutFullMatch) {
  std::mt19937_64 rng(23);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto sc = random_case(rng);
    const auto ps = PhraseSet::from_tokens(sc.phrases, sc.delta);
    MatchState st = MatchState::initial(ps);
    double sum = 0.0;
    bool any_match = false;
    for (TokenId x : sc.stream) {
      const auto r = compute_bonus(ps, st, x);
      sum += r.bonus;
      any_match = any_match || !r.matched_phrase_indices.empty();
      st = r.new_state;
    }
    if (any_match || st != MatchState::initial(ps)) continue;
    ++checked;
    EXPECT_NEAR(sum, 0.0, 1e-9);
  }
  EXPECT_GT(checked, 100);
}

TEST(ComputeBonus, ZeroDeltaKeepsTransitions) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 300; ++trial) {
    auto sc = random_case(rng);
    const auto on = PhraseSet::from_tokens(sc.phrases, 1.0 + sc.delta);
    const auto off = on.with_delta(0.0);
    MatchState s1 = MatchState::initial(on), s0 = s1;
    for (TokenId x : sc.stream) {
      const auto r1 = compute_bonus(on, s1, x);
      const auto r0 = compute_bonus(off, s0, x);
      EXPECT_EQ(r0.bonus, 0.0);
      EXPECT_EQ(r0.new_state, r1.new_state);
      EXPECT_EQ(r0.matched_phrase_indices, r1.matched_phrase_indices);
      s1 = r1.new_state;
      s0 = r0.new_state;
    }
  }
}

TEST(ComputeBonus, BonusStaysWithinBounds) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 500; ++trial) {
    const auto sc = random_case(rng);
    const auto ps = PhraseSet::from_tokens(sc.phrases, sc.delta);
    MatchState st = MatchState::initial(ps);
    for (TokenId x : sc.stream) {
      const auto r = compute_bonus(ps, st, x);
      EXPECT_GE(r.bonus, -sc.delta * (ps.max_length() - 1) - 1e-12);
      EXPECT_LE(r.bonus, sc.delta * ps.max_length() + 1e-12);
      if (!r.matched_phrase_indices.empty()) {
        EXPECT_EQ(r.new_state, MatchState::initial(ps));
      }
      st = r.new_state;
    }
  }
}

}  // namespace
}  // namespace kmpbias
