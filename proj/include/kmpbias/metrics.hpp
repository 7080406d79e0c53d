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
#include <span>
#include <vector>

#include "kmpbias/error.hpp"

namespace kmpbias {

/// Levenshtein distance over token sequences (unit costs).
inline std::size_t edit_distance(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  std::vector<std::size_t> prev(ref.size() + 1);
  std::vector<std::size_t> cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

struct WerResult {
  std::size_t edits = 0;
  std::size_t ref_length = 0;
  double wer = 0.0;
  /// Empty reference with a non-empty hypothesis: wer is the insertion count.
  bool degenerate = false;
};

inline WerResult word_error_rate(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  WerResult r;
  r.edits = edit_distance(hyp, ref);
  r.ref_length = ref.size();
  if (ref.empty()) {
    r.degenerate = !hyp.empty();
    r.wer = static_cast<double>(r.edits);
  } else {
    r.wer = static_cast<double>(r.edits) / static_cast<double>(ref.size());
  }
  return r;
}

}  // namespace kmpbias
