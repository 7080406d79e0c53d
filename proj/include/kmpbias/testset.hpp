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
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kmpbias/channel.hpp"
#include "kmpbias/error.hpp"
#include "kmpbias/text_io.hpp"

namespace kmpbias {

enum class Domain { anti, with_prefix, without_prefix };

inline std::string to_string(Domain d) {
  switch (d) {
    case Domain::anti: return "anti";
    case Domain::with_prefix: return "with_prefix";
    case Domain::without_prefix: return "without_prefix";
  }
  return "?";
}

inline Domain parse_domain(const std::string& s) {
  if (s == "anti") return Domain::anti;
  if (s == "with_prefix") return Domain::with_prefix;
  if (s == "without_prefix") return Domain::without_prefix;
  throw FormatError("unknown domain '" + s + "' (expected anti, with_prefix or without_prefix)");
}

struct UtteranceSpec {
  std::string id;
  Domain domain = Domain::anti;
  std::uint64_t seed = 0;
  std::vector<TokenId> reference;
  std::vector<std::vector<TokenId>> phrases;
  int entity = -1;  // index into phrases, -1 when no phrase is spoken
  NoiseParams noise;

  bool in_domain() const { return entity >= 0; }

  /// Start of the entity inside the reference, or -1.
  int entity_offset() const {
    if (entity < 0) return -1;
    const auto& e = phrases.at(static_cast<std::size_t>(entity));
    auto it = std::search(reference.begin(), reference.end(), e.begin(), e.end());
    return it == reference.end() ? -1 : static_cast<int>(it - reference.begin());
  }

  std::vector<bool> entity_positions() const {
    std::vector<bool> mask(reference.size(), false);
    const int at = entity_offset();
    if (at >= 0) {
      for (std::size_t i = 0; i < phrases[static_cast<std::size_t>(entity)].size(); ++i) mask[static_cast<std::size_t>(at) + i] = true;
    }
    return mask;
  }

  ChannelScorer channel(const SimLayout& layout) const { return ChannelScorer(reference, entity_positions(), noise, layout); }

  friend bool operator==(const UtteranceSpec&, const UtteranceSpec&) = default;
};

struct GenConfig {
  Domain domain = Domain::with_prefix;
  int count = 50;
  int phrases_per_utterance = 50;  // B
  std::uint64_t seed = 0;
  SimLayout layout;
  NoiseParams noise;  // seed field is overwritten per utterance
};

namespace detail {

inline bool contains_run(const std::vector<TokenId>& hay, const std::vector<TokenId>& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// B distinct entity phrases, none a contiguous run of another.
inline std::vector<std::vector<TokenId>> draw_phrases(std::mt19937_64& rng, int count, const SimLayout& layout) {
  std::vector<std::vector<TokenId>> out;
  const long max_attempts = 200L * count + 1000;
  long attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > max_attempts) {
      throw GenerationError("cannot draw " + std::to_string(count) + " distinct phrases from " + std::to_string(layout.entity_tokens) +
                            " entity tokens");
    }
    const int len = uniform_int(rng, 1, layout.max_phrase_length);
    std::vector<TokenId> phrase;
    for (int i = 0; i < len; ++i) phrase.push_back(layout.entity(uniform_int(rng, 0, layout.entity_tokens - 1)));
    const bool clash = std::any_of(out.begin(), out.end(), [&](const auto& other) {
      return contains_run(other, phrase) || contains_run(phrase, other);
    });
    if (!clash) out.push_back(std::move(phrase));
  }
  return out;
}

inline void append_fillers(std::mt19937_64& rng, std::vector<TokenId>& ref, int n, const SimLayout& layout) {
  for (int i = 0; i < n; ++i) ref.push_back(layout.filler(uniform_int(rng, 0, layout.filler_tokens - 1)));
}

}  // namespace detail

/// Deterministic synthetic test set. In-domain utterances speak exactly one
/// phrase of their own list (after a carrier word for with_prefix); anti
/// utterances speak only filler words, so none of their phrases occurs.
inline std::vector<UtteranceSpec> generate_testset(const GenConfig& cfg) {
  if (cfg.phrases_per_utterance < 1) throw GenerationError("B must be >= 1");
  if (cfg.count < 0) throw GenerationError("count must be >= 0");
  if (cfg.layout.filler_tokens < 1 || cfg.layout.entity_tokens < 1 || cfg.layout.max_phrase_length < 1 ||
      cfg.layout.max_phrase_length > 16) {
    throw GenerationError("invalid simulated vocabulary layout");
  }
  std::vector<UtteranceSpec> specs;
  specs.reserve(static_cast<std::size_t>(cfg.count));
  for (int u = 0; u < cfg.count; ++u) {
    UtteranceSpec s;
    s.domain = cfg.domain;
    s.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(u));
    s.id = to_string(cfg.domain) + "-" + std::to_string(u);
    std::mt19937_64 rng(s.seed);
    s.phrases = detail::draw_phrases(rng, cfg.phrases_per_utterance, cfg.layout);
    if (cfg.domain == Domain::anti) {
      detail::append_fillers(rng, s.reference, uniform_int(rng, 2, 6), cfg.layout);
    } else {
      s.entity = uniform_int(rng, 0, cfg.phrases_per_utterance - 1);
      detail::append_fillers(rng, s.reference, uniform_int(rng, 0, 2), cfg.layout);
      if (cfg.domain == Domain::with_prefix) s.reference.push_back(cfg.layout.carrier(uniform_int(rng, 0, SimLayout::kCarriers - 1)));
      const auto& e = s.phrases[static_cast<std::size_t>(s.entity)];
      s.reference.insert(s.reference.end(), e.begin(), e.end());
      detail::append_fillers(rng, s.reference, uniform_int(rng, 0, 2), cfg.layout);
    }
    s.noise = cfg.noise;
    s.noise.seed = mix_seed(s.seed, 0xC4A2);
    specs.push_back(std::move(s));
  }
  return specs;
}

inline constexpr std::string_view kUtteranceHeader = "# kmpbias utterances v1";

/// One tab-separated record per utterance:
///   utt <id> domain=<d> seed=<n> entity=<i> noise=<p_lo,p_hi,pe_lo,pe_hi,k,q,floor,seed>
///   ref=<ids> phrases=<ids>|<ids>|...
inline void write_utterances(std::ostream& out, const std::vector<UtteranceSpec>& specs) {
  out << kUtteranceHeader << '\n';
  for (const auto& s : specs) {
    const auto& n = s.noise;
    out << "utt\t" << s.id << "\tdomain=" << to_string(s.domain) << "\tseed=" << s.seed << "\tentity=" << s.entity << "\tnoise="
        << format_double(n.p_lo) << ',' << format_double(n.p_hi) << ',' << format_double(n.p_entity_lo) << ','
        << format_double(n.p_entity_hi) << ',' << n.fanout << ',' << format_double(n.confusion_share) << ','
        << format_double(n.floor) << ',' << n.seed << "\tref=" << join_ints(s.reference) << "\tphrases=";
    for (std::size_t b = 0; b < s.phrases.size(); ++b) {
      if (b) out << '|';
      out << join_ints(s.phrases[b]);
    }
    out << '\n';
  }
}

inline std::vector<UtteranceSpec> read_utterances(std::istream& in) {
  std::vector<UtteranceSpec> specs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    const auto where = " at utterance line " + std::to_string(lineno);
    if (fields.size() < 2 || fields[0] != "utt") throw FormatError("expected 'utt' record" + where);
    UtteranceSpec s;
    s.id = fields[1];
    std::map<std::string, std::string> kv;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos) throw FormatError("malformed field '" + fields[i] + "'" + where);
      kv[fields[i].substr(0, eq)] = fields[i].substr(eq + 1);
    }
    for (const char* key : {"domain", "seed", "entity", "noise", "ref", "phrases"}) {
      if (!kv.count(key)) throw FormatError(std::string("missing field '") + key + "'" + where);
    }
    try {
      s.domain = parse_domain(kv["domain"]);
      s.seed = std::stoull(kv["seed"]);
      s.entity = std::stoi(kv["entity"]);
      std::vector<std::string> parts;
      std::stringstream ns(kv["noise"]);
      while (std::getline(ns, f, ',')) parts.push_back(f);
      if (parts.size() != 8) throw FormatError("noise needs 8 comma-separated values" + where);
      s.noise.p_lo = std::stod(parts[0]);
      s.noise.p_hi = std::stod(parts[1]);
      s.noise.p_entity_lo = std::stod(parts[2]);
      s.noise.p_entity_hi = std::stod(parts[3]);
      s.noise.fanout = std::stoi(parts[4]);
      s.noise.confusion_share = std::stod(parts[5]);
      s.noise.floor = std::stod(parts[6]);
      s.noise.seed = std::stoull(parts[7]);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("malformed numeric field" + where);
    }
    s.reference = parse_ids(kv["ref"]);
    std::stringstream ps(kv["phrases"]);
    while (std::getline(ps, f, '|')) {
      auto ids = parse_ids(f);
      if (ids.empty()) throw FormatError("empty phrase" + where);
      s.phrases.push_back(std::move(ids));
    }
    if (s.entity >= static_cast<int>(s.phrases.size()) || s.entity < -1) throw FormatError("entity index out of range" + where);
    specs.push_back(std::move(s));
  }
  return specs;
}

inline std::vector<UtteranceSpec> load_utterances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open utterance file " + path);
  return read_utterances(in);
}

}  // namespace kmpbias
