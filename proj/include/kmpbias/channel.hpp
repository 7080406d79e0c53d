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

// Toy stand-in for an ASR model: a position-indexed noisy channel around a
// reference transcript.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kmpbias/beam_search.hpp"
#include "kmpbias/error.hpp"
#include "kmpbias/text_io.hpp"

namespace kmpbias {

/// Token id layout of the simulated vocabulary:
///   0 end of sentence, 1..3 carrier words, then filler words, then entity words.
struct SimLayout {
  int filler_tokens = 80;
  int entity_tokens = 80;
  int max_phrase_length = 3;

  static constexpr TokenId kEos = 0;
  static constexpr int kCarriers = 3;

  TokenId carrier(int i) const { return static_cast<TokenId>(1 + i); }
  TokenId filler(int i) const { return static_cast<TokenId>(1 + kCarriers + i); }
  TokenId entity(int i) const { return static_cast<TokenId>(1 + kCarriers + filler_tokens + i); }
  int vocab_size() const { return 1 + kCarriers + filler_tokens + entity_tokens; }
  bool is_entity(TokenId t) const { return t >= entity(0) && t < vocab_size(); }

  Vocabulary vocabulary() const {
    std::vector<std::string> words{"</s>", "call", "open", "play"};
    for (int i = 0; i < filler_tokens; ++i) words.push_back("w" + std::to_string(i));
    for (int i = 0; i < entity_tokens; ++i) words.push_back("e" + std::to_string(i));
    return Vocabulary(std::move(words));
  }

  std::vector<std::vector<TokenId>> carrier_prefixes() const {
    std::vector<std::vector<TokenId>> out;
    for (int i = 0; i < kCarriers; ++i) out.push_back({carrier(i)});
    return out;
  }
};

/// Channel parameters. At each position the true token receives mass p,
/// `fanout` confusable tokens share (1 - p) * confusion_share and every other
/// token shares the rest with near-uniform random weights. The final
/// distribution is smoothed by `floor` so every token stays finite.
struct NoiseParams {
  double p_lo = 0.55;
  double p_hi = 0.95;
  double p_entity_lo = 0.05;
  double p_entity_hi = 0.6;
  int fanout = 4;
  double confusion_share = 0.8;
  double floor = 1e-6;
  std::uint64_t seed = 0;

  static NoiseParams noiseless(std::uint64_t seed) {
    NoiseParams n;
    n.p_lo = n.p_hi = n.p_entity_lo = n.p_entity_hi = 1.0;
    n.seed = seed;
    return n;
  }

  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }
inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

class ChannelScorer final : public Scorer {
 public:
  ChannelScorer(std::vector<TokenId> reference, std::vector<bool> entity_positions, const NoiseParams& noise, const SimLayout& layout)
      : layout_(layout) {
    if (entity_positions.size() != reference.size()) throw ContractError("entity position mask must match reference length");
    if (noise.fanout < 0 || noise.p_lo > noise.p_hi || noise.p_entity_lo > noise.p_entity_hi || noise.p_lo < 0.0 || noise.p_hi > 1.0 ||
        noise.p_entity_lo < 0.0 || noise.p_entity_hi > 1.0 || noise.floor < 0.0 || noise.floor >= 1.0) {
      throw ContractError("invalid channel parameters");
    }
    const int vocab = layout.vocab_size();
    for (std::size_t pos = 0; pos <= reference.size(); ++pos) {
      const bool at_end = pos == reference.size();
      const TokenId truth = at_end ? SimLayout::kEos : reference[pos];
      if (truth < 0 || truth >= vocab) throw ContractError("reference token outside simulated vocabulary");
      const bool entity = !at_end && entity_positions[pos];
      rows_.push_back(make_row(truth, entity, noise, mix_seed(noise.seed, pos)));
    }
  }

  int vocab_size() const override { return layout_.vocab_size(); }
  std::optional<TokenId> eos_id() const override { return SimLayout::kEos; }

  std::vector<double> log_scores(std::span<const TokenId> prefix) const override {
    const std::size_t pos = std::min(prefix.size(), rows_.size() - 1);
    return rows_[pos];
  }

  const std::vector<double>& row(std::size_t pos) const { return rows_.at(pos); }
  std::size_t positions() const { return rows_.size(); }

 private:
  std::vector<double> make_row(TokenId truth, bool entity, const NoiseParams& noise, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    const int vocab = layout_.vocab_size();
    const double p = entity ? uniform(rng, noise.p_entity_lo, noise.p_entity_hi) : uniform(rng, noise.p_lo, noise.p_hi);

    // Confusables come from the same word class as the truth.
    std::vector<TokenId> pool;
    if (entity) {
      for (int i = 0; i < layout_.entity_tokens; ++i) pool.push_back(layout_.entity(i));
    } else {
      for (int i = 0; i < SimLayout::kCarriers; ++i) pool.push_back(layout_.carrier(i));
      for (int i = 0; i < layout_.filler_tokens; ++i) pool.push_back(layout_.filler(i));
    }
    std::erase(pool, truth);
    std::vector<TokenId> confusables;
    for (int j = 0; j < noise.fanout && !pool.empty(); ++j) {
      const auto pick = static_cast<std::size_t>(rng() % pool.size());
      confusables.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }

    std::vector<double> prob(static_cast<std::size_t>(vocab), 0.0);
    std::vector<bool> assigned(static_cast<std::size_t>(vocab), false);
    prob[static_cast<std::size_t>(truth)] = p;
    assigned[static_cast<std::size_t>(truth)] = true;

    const double confusion_mass = confusables.empty() ? 0.0 : (1.0 - p) * noise.confusion_share;
    std::vector<double> w;
    double wsum = 0.0;
    for (std::size_t j = 0; j < confusables.size(); ++j) {
      w.push_back(uniform(rng, 0.2, 1.0));
      wsum += w.back();
    }
    for (std::size_t j = 0; j < confusables.size(); ++j) {
      prob[static_cast<std::size_t>(confusables[j])] = confusion_mass * w[j] / wsum;
      assigned[static_cast<std::size_t>(confusables[j])] = true;
    }

    const double rest_mass = 1.0 - p - confusion_mass;
    std::vector<double> rest(static_cast<std::size_t>(vocab), 0.0);
    double rest_sum = 0.0;
    for (int t = 0; t < vocab; ++t) {
      if (assigned[static_cast<std::size_t>(t)]) continue;
      rest[static_cast<std::size_t>(t)] = uniform(rng, 0.5, 1.5);
      rest_sum += rest[static_cast<std::size_t>(t)];
    }
    for (int t = 0; t < vocab; ++t) {
      if (!assigned[static_cast<std::size_t>(t)] && rest_sum > 0.0) prob[static_cast<std::size_t>(t)] = rest_mass * rest[static_cast<std::size_t>(t)] / rest_sum;
    }

    std::vector<double> logp(static_cast<std::size_t>(vocab));
    for (int t = 0; t < vocab; ++t) {
      logp[static_cast<std::size_t>(t)] = std::log((1.0 - noise.floor) * prob[static_cast<std::size_t>(t)] + noise.floor / vocab);
    }
    return logp;
  }

  SimLayout layout_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace kmpbias
