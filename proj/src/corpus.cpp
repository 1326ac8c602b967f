// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dabs/error.hpp"
#include "dabs/random.hpp"

namespace dabs {

using nlohmann::json;

std::vector<AspectQuery> Sentence::queries() const {
  std::vector<AspectQuery> q;
  q.reserve(aspects.size());
  for (const auto& a : aspects) q.push_back(a.query);
  return q;
}

namespace {

struct TokenSpan {
  std::string text;
  std::size_t begin = 0, end = 0;  // byte offsets, half-open
};

std::vector<TokenSpan> tokenize_with_offsets(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    TokenSpan t{std::string(text.substr(b, i - b)), b, i};
    for (auto& ch : t.text) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

std::string_view phenomenon_name(Phenomenon p) {
  switch (p) {
    case Phenomenon::kPlain: return "plain";
    case Phenomenon::kNegation: return "negation";
    case Phenomenon::kContrast: return "contrast";
    case Phenomenon::kConflict: return "conflict";
  }
  return "plain";
}

Lexicons Lexicons::defaults() {
  Lexicons l;
  l.aspects = {"food",     "service",   "staff",       "waiter",     "pizza",
               "pasta",    "wine",      "drinks",      "dessert",    "atmosphere",
               "decor",    "music",     "prices",      "menu",       "portions",
               "coffee",   "salad",     "steak",       "sushi",      "bread",
               "parking",  "view",      "seating",     "location",   "battery life",
               "screen",   "keyboard",  "customer support", "speakers", "delivery",
               "wine list", "fish tacos"};
  l.positive = {"great",   "delicious", "excellent", "friendly", "amazing",   "fantastic",
                "superb",  "lovely",    "tasty",     "wonderful", "fresh",    "perfect",
                "good",    "nice",      "attentive", "cozy"};
  l.negative = {"terrible", "awful", "bland",  "rude",  "slow",     "horrible",
                "disappointing", "cold", "overpriced", "bad", "dirty", "noisy",
                "stale",    "mediocre", "greasy", "poor"};
  l.neutral = {"average", "standard", "typical", "ordinary", "usual", "plain"};
  l.negators = {"was not", "was never", "wasn't", "is not", "isn't", "was not at all"};
  return l;
}

void GenSpec::validate() const {
  auto sums_to_one = [](double total) { return std::abs(total - 1.0) <= 1e-9; };
  if (m_probs.empty()) throw SpecError("gen: empty aspect-count distribution");
  for (double p : m_probs)
    if (p < 0.0) throw SpecError("gen: negative aspect-count probability");
  if (!sums_to_one(std::accumulate(m_probs.begin(), m_probs.end(), 0.0)))
    throw SpecError("gen: aspect-count probabilities must sum to 1");
  for (double p : mix)
    if (p < 0.0) throw SpecError("gen: negative phenomenon probability");
  if (!sums_to_one(std::accumulate(mix.begin(), mix.end(), 0.0)))
    throw SpecError("gen: phenomenon mix must sum to 1");
  for (double p : label_weights)
    if (p < 0.0) throw SpecError("gen: negative label weight");
  if (label_weights[0] + label_weights[2] <= 0.0)
    throw SpecError("gen: label weights leave no polar class");
  if (filler_prob < 0.0 || filler_prob > 1.0) throw SpecError("gen: filler_prob outside [0, 1]");
  if (lexicons.aspects.empty() || lexicons.positive.empty() || lexicons.negative.empty() ||
      lexicons.neutral.empty() || lexicons.negators.empty())
    throw SpecError("gen: every lexicon must be nonempty");
  double multi = 0.0;
  for (std::size_t i = 1; i < m_probs.size() && i < lexicons.aspects.size(); ++i)
    multi += m_probs[i];
  const bool needs_multi = mix[2] > 0.0 || mix[3] > 0.0;
  if (needs_multi && multi <= 0.0)
    throw SpecError("gen: contrast/conflict sentences need M >= 2, which has zero probability");
}

namespace {

template <typename C>
const auto& pick(const C& items, Rng& rng) {
  return items[below(rng, items.size())];
}

Label opposite(Label l) { return l == Label::kPositive ? Label::kNegative : Label::kPositive; }

class SentenceBuilder {
 public:
  void words(std::string_view phrase) {
    for (auto& t : tokenize(phrase)) tokens_.push_back(std::move(t));
  }
  void aspect(const std::string& term, Label label) {
    AspectTerm a;
    a.term = term;
    a.query.first = tokens_.size() + 1;
    words(term);
    a.query.last = tokens_.size();
    a.query.label = label;
    aspects_.push_back(std::move(a));
  }
  Sentence finish(std::string id) {
    Sentence s;
    s.id = std::move(id);
    s.tokens = std::move(tokens_);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) s.text += (i ? " " : "") + s.tokens[i];
    s.aspects = std::move(aspects_);
    return s;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<AspectTerm> aspects_;
};

struct ClausePlan {
  Label label = Label::kNeutral;
  bool negated = false;
};

void emit_clause(SentenceBuilder& b, const std::string& term, const ClausePlan& plan,
                 const Lexicons& lex, Rng& rng) {
  if (plan.negated) {
    // The predicate carries the opposite polarity; the negator flips it back.
    const auto& pred = pick(plan.label == Label::kPositive ? lex.negative : lex.positive, rng);
    b.words("the");
    b.aspect(term, plan.label);
    b.words(pick(lex.negators, rng));
    b.words(pred);
    return;
  }
  if (plan.label == Label::kNeutral) {
    switch (below(rng, 4)) {
      case 0: b.words("we ordered the"); b.aspect(term, plan.label); break;
      case 1: b.words("i asked about the"); b.aspect(term, plan.label); break;
      case 2: b.words("the"); b.aspect(term, plan.label); b.words("was " + pick(lex.neutral, rng)); break;
      default: b.words("the"); b.aspect(term, plan.label); b.words("is " + pick(lex.neutral, rng)); break;
    }
    return;
  }
  const auto& pred = pick(plan.label == Label::kPositive ? lex.positive : lex.negative, rng);
  switch (below(rng, 4)) {
    case 0: b.words("the"); b.aspect(term, plan.label); b.words("was " + pred); break;
    case 1: b.words("the"); b.aspect(term, plan.label); b.words("is really " + pred); break;
    case 2: b.words("the"); b.aspect(term, plan.label); b.words("seemed " + pred); break;
    default: b.words(pred); b.aspect(term, plan.label); break;
  }
}

const std::vector<std::string> kPrefixes = {"honestly ,", "overall ,", "to be fair ,",
                                            "we went there last week and",
                                            "without a doubt ,", "i think", "my friend said"};
const std::vector<std::string> kSuffixes = {"for sure", "in my opinion", "this time",
                                            "as usual"};

Label draw_label(const std::array<double, 3>& w, Rng& rng) {
  return static_cast<Label>(draw_index(rng, {w[0], w[1], w[2]}));
}

Label draw_polar(const std::array<double, 3>& w, Rng& rng) {
  return draw_index(rng, {w[0], w[2]}) == 0 ? Label::kPositive : Label::kNegative;
}

Sentence generate_one(const GenSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, index));
  const Lexicons& lex = spec.lexicons;
  const auto kind = static_cast<Phenomenon>(
      draw_index(rng, {spec.mix[0], spec.mix[1], spec.mix[2], spec.mix[3]}));
  const std::size_t max_m = std::min(spec.m_probs.size(), lex.aspects.size());
  std::vector<double> weights(spec.m_probs.begin(), spec.m_probs.begin() + max_m);
  const bool multi = kind == Phenomenon::kContrast || kind == Phenomenon::kConflict;
  if (multi) weights[0] = 0.0;
  const std::size_t m = draw_index(rng, weights) + 1;

  std::vector<std::size_t> order(lex.aspects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_range(order.begin(), order.end(), rng);

  std::vector<ClausePlan> plans(m);
  for (auto& p : plans) p.label = draw_label(spec.label_weights, rng);
  std::size_t contrast_at = 0;
  switch (kind) {
    case Phenomenon::kPlain:
      break;
    case Phenomenon::kNegation: {
      const std::size_t target = below(rng, m);
      for (std::size_t i = 0; i < m; ++i) {
        if (i == target || (plans[i].label != Label::kNeutral && uniform01(rng) < 0.3)) {
          if (plans[i].label == Label::kNeutral) plans[i].label = draw_polar(spec.label_weights, rng);
          plans[i].negated = true;
        }
      }
      break;
    }
    case Phenomenon::kContrast: {
      contrast_at = below(rng, m - 1);
      plans[contrast_at].label = draw_polar(spec.label_weights, rng);
      plans[contrast_at + 1].label = opposite(plans[contrast_at].label);
      break;
    }
    case Phenomenon::kConflict: {
      const std::size_t a = below(rng, m);
      std::size_t b = below(rng, m - 1);
      if (b >= a) ++b;
      plans[a].label = Label::kPositive;
      plans[b].label = Label::kNegative;
      for (auto& p : plans)
        if (p.label != Label::kNeutral && uniform01(rng) < 0.15) p.negated = true;
      break;
    }
  }

  SentenceBuilder b;
  if (uniform01(rng) < spec.filler_prob) b.words(pick(kPrefixes, rng));
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) {
      if (kind == Phenomenon::kContrast && i == contrast_at + 1)
        b.words(pick(std::vector<std::string>{"but", "although", "while"}, rng));
      else
        b.words(pick(std::vector<std::string>{"and", ",", "and also"}, rng));
    }
    emit_clause(b, lex.aspects[order[i]], plans[i], lex, rng);
  }
  if (uniform01(rng) < spec.filler_prob) b.words(pick(kSuffixes, rng));

  char id[32];
  std::snprintf(id, sizeof id, "syn-%06zu", index + 1);
  return b.finish(id);
}

}  // namespace

Corpus generate(const GenSpec& spec) {
  spec.validate();
  Corpus out;
  out.reserve(spec.n_sentences);
  for (std::size_t i = 0; i < spec.n_sentences; ++i) out.push_back(generate_one(spec, i));
  return out;
}

Corpus ingest_jsonl(std::istream& in, std::vector<IngestWarning>* warnings) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char ch) { return std::isspace(ch); }))
      continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(where + "malformed JSON (" + e.what() + ")");
    }
    try {
      Sentence s;
      s.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      s.text = j.at("text").get<std::string>();
      const auto toks = tokenize_with_offsets(s.text);
      for (const auto& t : toks) s.tokens.push_back(t.text);
      for (const auto& a : j.at("aspects")) {
        const auto from = a.at("from_char").get<std::size_t>();
        const auto to = a.at("to_char").get<std::size_t>();
        if (from >= to || to > s.text.size())
          throw InputError(where + "aspect characters [" + std::to_string(from) + ", " +
                           std::to_string(to) + ") are outside the text");
        std::size_t first = 0, last = 0;
        for (std::size_t t = 0; t < toks.size(); ++t) {
          if (toks[t].end > from && toks[t].begin < to) {
            if (first == 0) first = t + 1;
            last = t + 1;
          }
        }
        if (first == 0)
          throw InputError(where + "aspect characters cover no token");
        AspectTerm term;
        term.term = a.contains("term") ? a.at("term").get<std::string>()
                                       : s.text.substr(from, to - from);
        term.query.first = first;
        term.query.last = last;
        term.query.label = parse_label(a.at("label").get<std::string>());
        if ((toks[first - 1].begin != from || toks[last - 1].end != to) && warnings)
          warnings->push_back({line_no, "aspect \"" + term.term + "\" in " + s.id +
                                            " snapped outward to tokens [" +
                                            std::to_string(first) + ", " +
                                            std::to_string(last) + "]"});
        s.aspects.push_back(std::move(term));
      }
      corpus.push_back(std::move(s));
    } catch (const InputError& e) {
      const std::string msg = e.what();
      throw InputError(msg.rfind("line ", 0) == 0 ? msg : where + msg);
    } catch (const json::exception& e) {
      throw InputError(where + "missing or mistyped field (" + e.what() + ")");
    }
  }
  return corpus;
}

Corpus ingest_jsonl_file(const std::string& path, std::vector<IngestWarning>* warnings) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return ingest_jsonl(in, warnings);
}

void export_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus) {
    const auto toks = tokenize_with_offsets(s.text);
    if (toks.size() != s.tokens.size())
      throw InputError("sentence " + s.id + ": text and tokens disagree");
    json j;
    j["id"] = s.id;
    j["text"] = s.text;
    j["aspects"] = json::array();
    for (const auto& a : s.aspects) {
      a.query.validate(toks.size());
      json aj;
      aj["from_char"] = toks[a.query.first - 1].begin;
      aj["to_char"] = toks[a.query.last - 1].end;
      aj["term"] = a.term;
      aj["label"] = a.query.label ? std::string(label_name(*a.query.label)) : "neutral";
      j["aspects"].push_back(std::move(aj));
    }
    out << j.dump() << '\n';
  }
}

void export_jsonl_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  export_jsonl(out, corpus);
}

CorpusStats stats(const Corpus& corpus) {
  if (corpus.empty()) throw InputError("stats: empty corpus");
  CorpusStats st;
  st.n_sentences = corpus.size();
  std::size_t m1 = 0, m2 = 0, mgt2 = 0;
  for (const auto& s : corpus) {
    st.n_aspects += s.m();
    if (s.m() == 1) ++m1;
    else if (s.m() == 2) ++m2;
    else if (s.m() > 2) ++mgt2;
    for (const auto& a : s.aspects)
      if (a.query.label) ++st.class_counts[static_cast<std::size_t>(*a.query.label)];
  }
  const double n = static_cast<double>(st.n_sentences);
  st.avg_m = static_cast<double>(st.n_aspects) / n;
  st.p_m1 = static_cast<double>(m1) / n;
  st.p_m2 = static_cast<double>(m2) / n;
  st.p_m_gt2 = static_cast<double>(mgt2) / n;
  st.p_m_gt1 = static_cast<double>(m2 + mgt2) / n;
  return st;
}

Vocab::Vocab() : words_{"<unk>", "<pad>"} {
  index_["<unk>"] = kUnk;
  index_["<pad>"] = kPad;
}

Vocab Vocab::build(const Corpus& corpus) {
  Vocab v;
  for (const auto& s : corpus)
    for (const auto& t : s.tokens)
      if (v.index_.emplace(t, static_cast<int>(v.words_.size())).second) v.words_.push_back(t);
  return v;
}

int Vocab::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

void Vocab::attach(Corpus& corpus) const {
  for (auto& s : corpus) s.ids = encode(s.tokens);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << json{{"words", words_}}.dump() << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed vocabulary (" + e.what() + ")", 0);
  }
  const auto words = j.value("words", std::vector<std::string>{});
  if (words.size() < 2 || words[kUnk] != "<unk>" || words[kPad] != "<pad>")
    throw FormatError(path + ": vocabulary must start with <unk>, <pad>", 0);
  Vocab v;
  v.words_.clear();
  v.index_.clear();
  for (const auto& w : words) {
    if (!v.index_.emplace(w, static_cast<int>(v.words_.size())).second)
      throw FormatError(path + ": duplicate vocabulary entry " + w, 0);
    v.words_.push_back(w);
  }
  return v;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0)
    throw ConfigError("split: test fraction outside [0, 1]");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle_range(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(corpus.size())));
  std::pair<Corpus, Corpus> out;
  std::vector<bool> is_test(corpus.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (is_test[i] ? out.second : out.first).push_back(corpus[i]);
  return out;
}

}  // namespace dabs
