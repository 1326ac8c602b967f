// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dabs/acbs.hpp"

namespace dabs {

struct AspectTerm {
  AspectQuery query;  // span and gold label
  std::string term;
};

struct Sentence {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<AspectTerm> aspects;
  std::vector<int> ids;  // filled by Vocab::attach

  std::size_t m() const { return aspects.size(); }
  std::vector<AspectQuery> queries() const;
};

using Corpus = std::vector<Sentence>;

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

enum class Phenomenon : std::uint8_t { kPlain = 0, kNegation, kContrast, kConflict };
std::string_view phenomenon_name(Phenomenon p);

struct Lexicons {
  std::vector<std::string> aspects;  // may contain multi-word terms
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> neutral;
  std::vector<std::string> negators;  // clause templates use "{neg}" slots

  static Lexicons defaults();
};

struct GenSpec {
  std::size_t n_sentences = 1000;
  std::vector<double> m_probs{0.5, 0.3, 0.2};  // P(M = 1), P(M = 2), ...
  // plain, negation, contrast, conflict
  std::array<double, 4> mix{0.4, 0.3, 0.1, 0.2};
  // gold class weights for unconstrained clauses: positive, neutral, negative
  std::array<double, 3> label_weights{0.4, 0.25, 0.35};
  double filler_prob = 0.3;
  Lexicons lexicons = Lexicons::defaults();
  std::uint64_t seed = 0;

  /// Throws SpecError (probabilities not summing to 1, empty lexicon,
  /// multi-aspect phenomenon requested while M > 1 is impossible).
  void validate() const;
};

/// Seed-deterministic; sentence i draws from its own derived stream.
Corpus generate(const GenSpec& spec);

struct IngestWarning {
  std::size_t line = 0;
  std::string message;
};

/// One JSON object per line: {id, text, aspects: [{from_char, to_char, term,
/// label}]}. Character spans are half-open and snapped outward to covering
/// tokens (with a warning) when they cut through a token.
Corpus ingest_jsonl(std::istream& in, std::vector<IngestWarning>* warnings = nullptr);
Corpus ingest_jsonl_file(const std::string& path, std::vector<IngestWarning>* warnings = nullptr);
void export_jsonl(std::ostream& out, const Corpus& corpus);
void export_jsonl_file(const std::string& path, const Corpus& corpus);

struct CorpusStats {
  std::size_t n_sentences = 0;
  std::size_t n_aspects = 0;
  double avg_m = 0;
  double p_m1 = 0, p_m2 = 0, p_m_gt2 = 0, p_m_gt1 = 0;
  std::array<std::size_t, kNumLabels> class_counts{};
};

/// InputError on an empty corpus.
CorpusStats stats(const Corpus& corpus);

class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;

  Vocab();
  /// Tokens in order of first appearance.
  static Vocab build(const Corpus& corpus);

  int id(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  /// Fills Sentence::ids for every sentence.
  void attach(Corpus& corpus) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Random partition of sentences; `test_fraction` of them go to the second part.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed);

}  // namespace dabs
