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

// Command-line front end: compile, match, gen, decode, sweep.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kmpbias/kmpbias.hpp"

namespace {

using namespace kmpbias;
using TokenLists = std::vector<std::vector<TokenId>>;

// Writes to a file when a path is given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw FormatError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::optional<Vocabulary> maybe_vocab(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return Vocabulary::load(path);
}

const Vocabulary* ptr(const std::optional<Vocabulary>& v) { return v ? &*v : nullptr; }

PhraseSet phrase_set(const TokenLists& phrases, double delta, const std::string& what) {
  auto ps = PhraseSet::from_tokens(phrases, delta);
  if (ps.duplicates() > 0) std::cerr << "warning: " << what << ": removed " << ps.duplicates() << " duplicate phrase(s)\n";
  return ps;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct LayoutFlags {
  SimLayout layout;
  void add(CLI::App* cmd) {
    cmd->add_option("--fillers", layout.filler_tokens, "Filler words in the simulated vocabulary")->capture_default_str();
    cmd->add_option("--entities", layout.entity_tokens, "Entity words in the simulated vocabulary")->capture_default_str();
    cmd->add_option("--max-phrase-length", layout.max_phrase_length, "Longest generated phrase")->capture_default_str();
  }
};

struct BeamFlags {
  int beam = 8;
  int expansions = 50;
  std::string engine = "scalar";
  std::optional<TokenId> blank;
  int max_steps = 32;
  void add(CLI::App* cmd) {
    cmd->add_option("--K,--beam", beam, "Beam size")->capture_default_str();
    cmd->add_option("--F,--expansions", expansions, "Expansions scored per hypothesis in fusion mode")->capture_default_str();
    cmd->add_option("--engine", engine, "Bonus engine: scalar or batch")->capture_default_str();
    cmd->add_option("--blank", blank, "Token id treated as blank");
    cmd->add_option("--max-steps", max_steps, "Decoding step limit")->capture_default_str();
  }
  BeamConfig config(BiasMode mode) const {
    BeamConfig c;
    c.beam_size = beam;
    c.bias_expansions = expansions;
    c.mode = mode;
    c.engine = parse_engine_kind(engine);
    c.blank_id = blank;
    c.max_steps = max_steps;
    return c;
  }
};

// ---- compile ---------------------------------------------------------------

struct CompileArgs {
  std::string phrases, vocab, out;
};

void run_compile(const CompileArgs& a) {
  const auto vocab = maybe_vocab(a.vocab);
  const auto ps = phrase_set(load_phrases(a.phrases, ptr(vocab)), 0.0, a.phrases);
  Output out(a.out);
  write_compiled(out.stream(), ps.patterns());
}

// ---- match -----------------------------------------------------------------

struct MatchArgs {
  std::string phrases, prefixes, vocab;
  double delta = 1.0;
  double lambda = 1.5;
  bool ids = false;
};

std::vector<TokenId> read_stream(std::istream& in, const Vocabulary* vocab, bool ids) {
  std::vector<TokenId> tokens;
  std::string line;
  while (std::getline(in, line)) {
    const auto part = ids ? parse_ids(line) : tokenize(line, vocab);
    tokens.insert(tokens.end(), part.begin(), part.end());
  }
  return tokens;
}

void run_match(const MatchArgs& a) {
  const auto vocab = maybe_vocab(a.vocab);
  const auto ps = phrase_set(load_phrases(a.phrases, ptr(vocab)), a.delta, a.phrases);
  const auto pfx = a.prefixes.empty() ? PrefixSet() : PrefixSet::from_tokens(load_phrases(a.prefixes, ptr(vocab)), a.lambda);
  auto state = PrefixedMatchState::initial(ps, pfx);
  double total = 0.0;
  for (TokenId x : read_stream(std::cin, ptr(vocab), a.ids)) {
    const auto r = compute_bonus_prefixed(ps, pfx, state, x);
    state = r.new_state;
    total += r.bonus;
    std::cout << (a.ids ? std::to_string(x) : detokenize({x}, ptr(vocab))) << "\tbonus=" << format_double(r.bonus)
              << "\tstate=" << join_ints(state.phrase_lengths, ',');
    if (!pfx.empty()) {
      std::cout << "\tprefix=" << join_ints(state.prefix_lengths, ',') << "\tmask=";
      for (std::size_t b = 0; b < state.prefix_mask.size(); ++b) std::cout << (state.prefix_mask[b] ? '1' : '0');
    }
    std::cout << "\tmatched=" << join_ints(r.matched_phrase_indices, ',') << '\n';
  }
  std::cout << "total\t" << format_double(total) << '\n';
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string domain = "with_prefix";
  int count = 50;
  int phrases = 50;
  std::optional<std::uint64_t> seed;
  std::string out, vocab_out, prefixes_out;
  NoiseParams noise;
  LayoutFlags layout;
};

void run_gen(GenArgs a) {
  GenConfig g;
  g.domain = parse_domain(a.domain);
  g.count = a.count;
  g.phrases_per_utterance = a.phrases;
  g.seed = *a.seed;
  g.layout = a.layout.layout;
  g.noise = a.noise;
  const auto specs = generate_testset(g);
  Output out(a.out);
  write_utterances(out.stream(), specs);
  if (!a.vocab_out.empty()) {
    Output v(a.vocab_out);
    g.layout.vocabulary().write(v.stream());
  }
  if (!a.prefixes_out.empty()) {
    Output p(a.prefixes_out);
    const auto vocab = g.layout.vocabulary();
    for (const auto& c : g.layout.carrier_prefixes()) p.stream() << detokenize(c, &vocab) << '\n';
  }
}

// ---- decode ----------------------------------------------------------------

struct DecodeArgs {
  std::string utts, mode = "fusion", phrases, prefixes, vocab, out;
  double delta = 1.0;
  double lambda = 1.5;
  bool carriers = false;
  BeamFlags beam;
  LayoutFlags layout;
};

TokenLists prefix_list(const std::string& path, bool carriers, const Vocabulary* vocab, const SimLayout& layout) {
  if (carriers) return layout.carrier_prefixes();
  if (path.empty()) return {};
  return load_phrases(path, vocab);
}

void run_decode(const DecodeArgs& a) {
  const auto specs = load_utterances(a.utts);
  const auto vocab = maybe_vocab(a.vocab);
  const auto& layout = a.layout.layout;
  DecodeOptions opt;
  opt.beam = a.beam.config(parse_bias_mode(a.mode));
  opt.delta = a.delta;
  opt.boost = a.lambda;
  opt.prefixes = prefix_list(a.prefixes, a.carriers, ptr(vocab), layout);
  if (!a.phrases.empty()) {
    opt.phrase_override = load_phrases(a.phrases, ptr(vocab));
    phrase_set(*opt.phrase_override, a.delta, a.phrases);  // validates and warns once
  }

  Output out(a.out);
  auto& os = out.stream();
  std::size_t edits = 0, ref_tokens = 0;
  int in_domain = 0, hits = 0;
  for (const auto& s : specs) {
    if (!opt.phrase_override) {
      const auto ps = PhraseSet::from_tokens(s.phrases, a.delta);
      if (ps.duplicates() > 0) std::cerr << "warning: utterance " << s.id << ": removed " << ps.duplicates() << " duplicate phrase(s)\n";
    }
    const auto o = decode_utterance(s, opt, layout);
    edits += o.wer.edits;
    ref_tokens += o.wer.ref_length;
    if (s.in_domain()) {
      ++in_domain;
      hits += o.entity_hit ? 1 : 0;
    }
    os << "result\t" << s.id << "\tmode=" << to_string(opt.beam.mode) << "\tscore=" << format_double(o.score)
       << "\ttokens=" << join_ints(o.hypothesis) << "\tmatched=" << join_ints(o.matched, ',') << "\twer=" << fmt(o.wer.wer)
       << "\ttruncated=" << (o.truncated ? 1 : 0);
    if (vocab) os << "\ttext=" << detokenize(o.hypothesis, ptr(vocab));
    os << '\n';
  }
  const double wer = ref_tokens ? static_cast<double>(edits) / static_cast<double>(ref_tokens) : 0.0;
  os << "summary\tutterances=" << specs.size() << "\twer=" << fmt(wer)
     << "\tentity_recall=" << fmt(in_domain ? static_cast<double>(hits) / in_domain : NAN) << '\n';
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> sets;
  std::string deltas = "0,0.5,1,1.5,2,3,4,6,8";
  std::string modes = "fusion:50,otf";
  std::string prefixes, vocab, out;
  double lambda = 1.5;
  bool carriers = false;
  bool no_baseline = false;
  unsigned threads = 0;
  BeamFlags beam;
  LayoutFlags layout;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

void run_sweep(const SweepArgs& a) {
  std::vector<NamedSet> sets;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ContractError("--set expects name=path, got '" + s + "'");
    sets.push_back({s.substr(0, eq), load_utterances(s.substr(eq + 1))});
  }
  std::vector<double> deltas;
  for (const auto& d : split(a.deltas, ',')) deltas.push_back(std::stod(d));

  SweepConfig cfg;
  cfg.modes.clear();
  for (const auto& m : split(a.modes, ',')) {
    const auto colon = m.find(':');
    ModeSpec spec;
    spec.mode = parse_bias_mode(m.substr(0, colon));
    if (spec.mode == BiasMode::none) throw ContractError("mode 'none' is always included as the baseline; list fusion or otf");
    spec.expansions = spec.mode == BiasMode::fusion ? (colon == std::string::npos ? a.beam.expansions : std::stoi(m.substr(colon + 1))) : 0;
    cfg.modes.push_back(spec);
  }
  cfg.beam = a.beam.config(BiasMode::fusion);
  cfg.boost = a.lambda;
  cfg.layout = a.layout.layout;
  const auto vocab = maybe_vocab(a.vocab);
  cfg.prefixes = prefix_list(a.prefixes, a.carriers, ptr(vocab), cfg.layout);
  cfg.include_baseline = !a.no_baseline;
  cfg.threads = a.threads;

  Output out(a.out);
  write_sweep_csv(out.stream(), sweep_delta(sets, deltas, cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KMP-based phrase biasing for beam search decoding"};
  app.require_subcommand(1);

  CompileArgs compile;
  auto* c = app.add_subcommand("compile", "Compile a phrase file into KMP failure tables");
  c->add_option("phrases", compile.phrases, "Newline-delimited phrase file")->required()->check(CLI::ExistingFile);
  c->add_option("--vocab", compile.vocab, "Vocabulary file (one word per line); characters are used without it");
  c->add_option("-o,--out", compile.out, "Output file (default stdout)");

  MatchArgs match;
  auto* m = app.add_subcommand("match", "Stream tokens from stdin and print per-token bonuses");
  m->add_option("phrases", match.phrases, "Newline-delimited phrase file")->required()->check(CLI::ExistingFile);
  m->add_option("--vocab", match.vocab, "Vocabulary file");
  m->add_option("--prefixes", match.prefixes, "Carrier prefix file");
  m->add_option("--delta", match.delta, "Per-token bonus")->capture_default_str();
  m->add_option("--lambda", match.lambda, "Prefix boost (>= 1)")->capture_default_str();
  m->add_flag("--ids", match.ids, "Read integer token ids instead of text");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic utterance set");
  g->add_option("--domain", gen.domain, "anti, with_prefix or without_prefix")->capture_default_str();
  g->add_option("--count", gen.count, "Number of utterances")->capture_default_str();
  g->add_option("--B,--phrases", gen.phrases, "Phrases per utterance")->capture_default_str();
  g->add_option("--seed", gen.seed, "Random seed")->required();
  g->add_option("-o,--out", gen.out, "Utterance file (default stdout)");
  g->add_option("--vocab-out", gen.vocab_out, "Also write the simulated vocabulary");
  g->add_option("--prefixes-out", gen.prefixes_out, "Also write the carrier prefix file");
  g->add_option("--p-lo", gen.noise.p_lo, "Lower bound of true-token mass")->capture_default_str();
  g->add_option("--p-hi", gen.noise.p_hi, "Upper bound of true-token mass")->capture_default_str();
  g->add_option("--p-entity-lo", gen.noise.p_entity_lo, "Lower bound of true-token mass at entity positions")->capture_default_str();
  g->add_option("--p-entity-hi", gen.noise.p_entity_hi, "Upper bound of true-token mass at entity positions")->capture_default_str();
  g->add_option("--fanout", gen.noise.fanout, "Confusable tokens per position")->capture_default_str();
  g->add_option("--confusion-share", gen.noise.confusion_share, "Share of the remaining mass given to confusables")->capture_default_str();
  g->add_option("--floor", gen.noise.floor, "Smoothing mass spread over the vocabulary")->capture_default_str();
  gen.layout.add(g);

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Decode an utterance set with the simulated channel");
  d->add_option("--utts", dec.utts, "Utterance file")->required()->check(CLI::ExistingFile);
  d->add_option("--mode", dec.mode, "none, fusion or otf")->capture_default_str();
  d->add_option("--delta", dec.delta, "Per-token bonus")->capture_default_str();
  d->add_option("--lambda", dec.lambda, "Prefix boost (>= 1)")->capture_default_str();
  d->add_option("--phrases", dec.phrases, "Phrase file replacing every utterance's own list");
  d->add_option("--prefixes", dec.prefixes, "Carrier prefix file");
  d->add_flag("--carriers", dec.carriers, "Use the built-in carrier words as prefixes");
  d->add_option("--vocab", dec.vocab, "Vocabulary for phrase/prefix files and text output");
  d->add_option("-o,--out", dec.out, "Output file (default stdout)");
  dec.beam.add(d);
  dec.layout.add(d);

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Sweep delta over one or more utterance sets and write CSV");
  s->add_option("--set", sw.sets, "name=utterance-file (repeatable)")->required();
  s->add_option("--deltas", sw.deltas, "Comma-separated delta grid")->capture_default_str();
  s->add_option("--modes", sw.modes, "Comma-separated modes, fusion[:F] or otf")->capture_default_str();
  s->add_option("--lambda", sw.lambda, "Prefix boost (>= 1)")->capture_default_str();
  s->add_option("--prefixes", sw.prefixes, "Carrier prefix file");
  s->add_flag("--carriers", sw.carriers, "Use the built-in carrier words as prefixes");
  s->add_option("--vocab", sw.vocab, "Vocabulary for the prefix file");
  s->add_flag("--no-baseline", sw.no_baseline, "Skip the unbiased rows");
  s->add_option("--threads", sw.threads, "Worker threads (0: all cores)")->capture_default_str();
  s->add_option("-o,--out", sw.out, "CSV output (default stdout)");
  sw.beam.add(s);
  sw.layout.add(s);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c->parsed()) run_compile(compile);
    if (m->parsed()) run_match(match);
    if (g->parsed()) run_gen(gen);
    if (d->parsed()) run_decode(dec);
    if (s->parsed()) run_sweep(sw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
