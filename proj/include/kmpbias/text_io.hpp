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

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kmpbias/error.hpp"
#include "kmpbias/kmp.hpp"

namespace kmpbias {

/// Word <-> id mapping; the id of a word is its line number in the vocab file.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (words_[i].empty()) throw FormatError("empty word at vocab line " + std::to_string(i + 1));
      if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second) throw FormatError("duplicate vocab word '" + words_[i] + "'");
    }
  }

  static Vocabulary read(std::istream& in) {
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      words.push_back(line);
    }
    return Vocabulary(std::move(words));
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open vocab file " + path);
    return read(in);
  }

  void write(std::ostream& out) const {
    for (const auto& w : words_) out << w << '\n';
  }

  int size() const noexcept { return static_cast<int>(words_.size()); }
  const std::string& word(TokenId id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> find(std::string_view w) const {
    auto it = index_.find(std::string(w));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// Whitespace words through the vocabulary, or one token per byte of the
/// trimmed line when no vocabulary is given.
inline std::vector<TokenId> tokenize(std::string_view line, const Vocabulary* vocab) {
  std::vector<TokenId> ids;
  const auto body = trim(line);
  if (vocab) {
    for (const auto& w : split_words(body)) {
      auto id = vocab->find(w);
      if (!id) throw FormatError("word '" + w + "' not in vocabulary");
      ids.push_back(*id);
    }
  } else {
    for (char c : body) ids.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
  }
  return ids;
}

inline std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary* vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (vocab) {
      if (i) out += ' ';
      out += (ids[i] >= 0 && ids[i] < vocab->size()) ? vocab->word(ids[i]) : "<" + std::to_string(ids[i]) + ">";
    } else {
      out += static_cast<char>(ids[i]);
    }
  }
  return out;
}

/// Newline-delimited phrases; blank lines and lines starting with '#' are skipped.
inline std::vector<std::vector<TokenId>> read_phrases(std::istream& in, const Vocabulary* vocab) {
  std::vector<std::vector<TokenId>> phrases;
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    phrases.push_back(tokenize(body, vocab));
  }
  return phrases;
}

inline std::vector<std::vector<TokenId>> load_phrases(const std::string& path, const Vocabulary* vocab) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open phrase file " + path);
  return read_phrases(in, vocab);
}

template <typename Range>
std::string join_ints(const Range& values, char sep = ' ') {
  std::string out;
  bool first = true;
  for (auto v : values) {
    if (!first) out += sep;
    out += std::to_string(v);
    first = false;
  }
  return out;
}

inline std::vector<TokenId> parse_ids(std::string_view s) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(s)) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(w, &used);
    } catch (const std::exception&) {
      throw FormatError("expected integer token id, got '" + w + "'");
    }
    if (used != w.size() || v < 0) throw FormatError("expected non-negative integer token id, got '" + w + "'");
    ids.push_back(static_cast<TokenId>(v));
  }
  return ids;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr std::string_view kCompiledHeader = "# kmpbias compiled patterns v1";

/// One tab-separated line per pattern:
///   pattern <index> tokens=<ids> failure=<table> gamma=<n>
inline void write_compiled(std::ostream& out, const std::vector<Pattern>& patterns) {
  out << kCompiledHeader << '\n';
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const auto& p = patterns[i];
    out << "pattern\t" << i << "\ttokens=" << join_ints(p.tokens()) << "\tfailure=" << join_ints(p.failure())
        << "\tgamma=" << p.gamma() << '\n';
  }
}

}  // namespace kmpbias
