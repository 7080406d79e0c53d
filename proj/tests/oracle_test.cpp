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

// Hand-checked cases for the brute-force references themselves.

#include "oracle/oracle.hpp"

#include <gtest/gtest.h>

namespace kmpbias::oracle {
namespace {

TEST(Oracle, NaiveSearchIsNonOverlapping) {
  EXPECT_EQ(naive_search({0, 0}, {0, 0, 0, 0, 0}), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(naive_search({1}, {0, 2}), std::vector<std::size_t>{});
}

TEST(Oracle, LongestBorder) {
  const Tokens t{0, 1, 0, 1, 0};
  EXPECT_EQ(longest_border(t, 5), 3);
  EXPECT_EQ(longest_border(t, 2), 0);
  EXPECT_EQ(longest_border(t, 1), 0);
}

TEST(Oracle, StepByDefinition) {
  const Tokens p{0, 1, 0, 2};
  EXPECT_EQ(step_by_definition(p, 3, 1).length, 2);
  EXPECT_EQ(step_by_definition(p, 3, 0).length, 1);
  EXPECT_TRUE(step_by_definition(p, 3, 2).full);
}

TEST(Oracle, ReplayCallJohn) {
  const auto r = replay_bonus({{1}}, {{0}}, 1.0, 2.0, {0, 1});
  EXPECT_EQ(r.bonuses, (std::vector<double>{0.0, 2.0}));
  EXPECT_EQ(r.boosted_match_steps, std::vector<std::size_t>{1});
}

TEST(Oracle, ReplaySkipsBlank) {
  const TokenId blank = 9;
  const auto r = replay_bonus({{0, 1}}, {}, 1.0, 1.0, {0, 9, 1}, &blank);
  EXPECT_EQ(r.bonuses, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(r.total_bonus, 2.0);
}

TEST(Oracle, EditDistance) {
  EXPECT_EQ(dp_edit_distance({0, 1, 2}, {0, 2}), 1u);
  EXPECT_EQ(dp_edit_distance({}, {1, 2}), 2u);
  EXPECT_EQ(dp_edit_distance({1, 2, 3}, {3, 2, 1}), 2u);
}

}  // namespace
}  // namespace kmpbias::oracle
