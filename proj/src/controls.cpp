// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/controls.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "dabs/config.hpp"
#include "dabs/error.hpp"

namespace dabs {

RegionBands RegionBands::for_depth(std::size_t k) {
  if (k == 0 || k % 3 != 0)
    throw ConfigError("region bands need K divisible by 3, got K = " + std::to_string(k));
  const std::size_t w = k / 3;
  RegionBands r;
  for (std::size_t b = 0; b < 3; ++b) r.bands[b] = DepthMask::band(b * w + 1, (b + 1) * w);
  return r;
}

void RegionBands::validate(std::size_t k) const {
  std::vector<int> seen(k + 1, 0);
  for (const auto& band : bands) {
    band.validate(k);
    for (auto u : band.allowed) ++seen[u];
  }
  for (std::size_t u = 1; u <= k; ++u)
    if (seen[u] != 1)
      throw ConfigError("region bands must partition 1.." + std::to_string(k) +
                        " (level " + std::to_string(u) + " covered " +
                        std::to_string(seen[u]) + " times)");
}

template <typename T>
RegionReport region_sweep(const DabsModel<T>& model, const Corpus& corpus,
                          const RegionBands& bands, const std::string& config) {
  if (!model.has_substrate()) throw ConfigError("region sweep needs a depth substrate");
  bands.validate(model.depth());
  RegionReport r;
  r.config = config;
  r.base_mf1 = evaluate_model(model, corpus).macro_f1;
  for (std::size_t b = 0; b < 3; ++b)
    r.band_mf1[b] = evaluate_model(model, corpus, &bands.bands[b]).macro_f1;
  const auto [lo, hi] = std::minmax_element(r.band_mf1.begin(), r.band_mf1.end());
  r.delta = *hi - *lo;
  r.best = static_cast<std::size_t>(hi - r.band_mf1.begin());
  return r;
}

void write_region_csv(std::ostream& out, const std::vector<RegionReport>& rows) {
  out << "config,base_mf1,shallow_mf1,middle_mf1,deep_mf1,delta,best_region\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,", r.base_mf1, r.band_mf1[0],
                  r.band_mf1[1], r.band_mf1[2], r.delta);
    out << r.config << ',' << buf << kRegionNames[r.best] << '\n';
  }
}

template <typename T>
Rand2LReport rand2l_trials(const DabsModel<T>& model, const Corpus& corpus, std::size_t trials,
                           std::uint64_t seed) {
  if (!model.has_substrate()) throw ConfigError("Rand-2L needs a depth substrate");
  const std::size_t k = model.depth();
  if (k < 2) throw ConfigError("Rand-2L needs K >= 2, got K = " + std::to_string(k));
  if (trials == 0) throw ConfigError("Rand-2L needs at least one trial");
  Rng rng(seed);
  Rand2LReport r;
  std::map<std::size_t, double> cache;  // a band's score does not change between trials
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t start = below(rng, k - 1) + 1;
    r.starts.push_back(start);
    auto it = cache.find(start);
    if (it == cache.end()) {
      const DepthMask mask = DepthMask::band(start, start + 1);
      it = cache.emplace(start, evaluate_model(model, corpus, &mask).macro_f1).first;
    }
    r.mf1.push_back(it->second);
  }
  double sum = 0.0;
  for (double v : r.mf1) sum += v;
  r.mean = sum / static_cast<double>(trials);
  double ss = 0.0;
  for (double v : r.mf1) ss += (v - r.mean) * (v - r.mean);
  r.stddev = trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1)) : 0.0;
  return r;
}

template <typename T>
SingleLayerReport single_layer_controls(const DabsModel<T>& model, const Corpus& corpus) {
  if (!model.has_substrate()) throw ConfigError("single-layer controls need a depth substrate");
  SingleLayerReport r;
  for (std::size_t u = 1; u <= model.depth(); ++u) {
    const DepthMask mask = DepthMask::band(u, u);
    r.mf1.push_back(evaluate_model(model, corpus, &mask).macro_f1);
  }
  const auto [lo, hi] = std::minmax_element(r.mf1.begin(), r.mf1.end());
  r.best = static_cast<std::size_t>(hi - r.mf1.begin()) + 1;
  r.worst = static_cast<std::size_t>(lo - r.mf1.begin()) + 1;
  r.delta = *hi - *lo;
  return r;
}

void write_depth_control_csv(std::ostream& out, const std::vector<DepthControlRow>& rows) {
  out << "config,base_mf1,rand2l_mean,rand2l_std,best_single_layer,best_single_mf1,"
         "worst_single_layer,worst_single_mf1,delta\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu,%.6f,%zu,%.6f,%.6f", r.base_mf1,
                  r.rand2l.mean, r.rand2l.stddev, r.single.best,
                  r.single.mf1.empty() ? 0.0 : r.single.mf1[r.single.best - 1], r.single.worst,
                  r.single.mf1.empty() ? 0.0 : r.single.mf1[r.single.worst - 1], r.single.delta);
    out << r.config << ',' << buf << '\n';
  }
}

bool is_negation_cue(std::string_view token) {
  std::string t(token);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (t == "no" || t == "not" || t == "never" || t == "without") return true;
  return t.size() >= 3 && t.compare(t.size() - 3, 3, "n't") == 0;
}

bool has_negation_cue(const std::vector<std::string>& tokens) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [](const std::string& t) { return is_negation_cue(t); });
}

NegationShift negation_shift(const std::vector<SelectionTrace>& traces, const Corpus& corpus,
                             const RegionBands& bands) {
  std::map<std::string, bool> negated;
  for (const auto& s : corpus) negated[s.id] = has_negation_cue(s.tokens);
  NegationShift r;
  for (const auto& t : traces) {
    const auto it = negated.find(t.sentence_id);
    if (it == negated.end())
      throw InputError("trace refers to unknown sentence " + t.sentence_id);
    if (t.alpha.empty()) throw InputError("trace of " + t.sentence_id + " carries no alpha");
    bands.validate(t.alpha.size());
    auto& acc = it->second ? r.negated_pp : r.plain_pp;
    (it->second ? r.n_negated : r.n_plain) += 1;
    for (std::size_t b = 0; b < 3; ++b)
      for (auto u : bands.bands[b].allowed) acc[b] += t.alpha[u - 1];
  }
  r.insufficient = r.n_negated == 0 || r.n_plain == 0;
  for (std::size_t b = 0; b < 3; ++b) {
    if (r.n_negated) r.negated_pp[b] *= 100.0 / static_cast<double>(r.n_negated);
    if (r.n_plain) r.plain_pp[b] *= 100.0 / static_cast<double>(r.n_plain);
    r.delta_pp[b] = r.insufficient ? 0.0 : r.negated_pp[b] - r.plain_pp[b];
  }
  return r;
}

std::size_t nearest_rank_percentile(std::vector<std::size_t> values, double percentile) {
  if (values.empty()) throw InputError("percentile of an empty sample");
  if (!(percentile > 0.0) || percentile > 100.0)
    throw ConfigError("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(values.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

StressSplits build_stress_splits(const Corpus& corpus, const StressParams& params) {
  StressSplits s;
  if (corpus.empty()) return s;
  std::vector<std::size_t> lengths;
  for (const auto& x : corpus) lengths.push_back(x.tokens.size());
  s.length_threshold = nearest_rank_percentile(lengths, params.percentile);
  for (const auto& x : corpus) {
    if (x.tokens.size() >= s.length_threshold) s.long_sentences.push_back(x);
    bool pos = false, neg = false;
    for (const auto& a : x.aspects) {
      pos |= a.query.label == Label::kPositive;
      neg |= a.query.label == Label::kNegative;
    }
    if (pos && neg) s.conflict.push_back(x);
    if (has_negation_cue(x.tokens) && x.tokens.size() > params.negation_min_length)
      s.negation.push_back(x);
  }
  return s;
}

std::string_view ablation_label(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "DABS (Full)";
    case Ablation::kTokenSel: return "- Token Sel.";
    case Ablation::kLayerSel: return "- Layer Sel.";
    case Ablation::kGatedFusion: return "- Gated Fusion";
    case Ablation::kDepthGru: return "- DepthGRU";
    case Ablation::kLcp: return "- LCP (Pooling)";
    case Ablation::kSparsity: return "- Sparsity";
    case Ablation::kSpanMask: return "- Span Masking";
    case Ablation::kGateEntropy: return "- Gate Entropy";
  }
  return "";
}

std::string_view ablation_key(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kTokenSel: return "token_sel";
    case Ablation::kLayerSel: return "layer_sel";
    case Ablation::kGatedFusion: return "gated_fusion";
    case Ablation::kDepthGru: return "depth_gru";
    case Ablation::kLcp: return "lcp";
    case Ablation::kSparsity: return "sparsity";
    case Ablation::kSpanMask: return "span_mask";
    case Ablation::kGateEntropy: return "gate_entropy";
  }
  return "";
}

Ablation parse_ablation(std::string_view name) {
  if (name == "none" || name == ablation_label(Ablation::kNone)) return Ablation::kNone;
  for (auto a : kAllAblations)
    if (name == ablation_key(a) || name == ablation_label(a)) return a;
  throw ConfigError("unknown ablation: " + std::string(name));
}

void apply_ablation(Ablation a, ModelConfig& model, LossWeights& loss) {
  switch (a) {
    case Ablation::kNone: break;
    case Ablation::kTokenSel: model.acbs.use_token_sel = false; break;
    case Ablation::kLayerSel: model.acbs.use_layer_sel = false; break;
    case Ablation::kGatedFusion: model.acbs.use_gated_fusion = false; break;
    case Ablation::kDepthGru: model.dora.use_depth_gru = false; break;
    case Ablation::kLcp: model.dora.use_lcp = false; break;
    case Ablation::kSparsity: loss.lambda_s = 0.0; break;
    case Ablation::kSpanMask: loss.lambda_m = 0.0; break;
    case Ablation::kGateEntropy: loss.lambda_ent = 0.0; break;
  }
}

std::vector<OrderRun> layer_order_protocol(const ModelConfig& base, const TrainConfig& train,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::uint64_t shuffle_seed) {
  std::vector<OrderRun> runs;
  for (auto order : {LayerOrder::kNormal, LayerOrder::kReversed, LayerOrder::kShuffled})
    for (auto seed : seeds) {
      OrderRun r;
      r.order = order;
      r.seed = seed;
      r.model = base;
      r.model.dora.layer_order = order;
      r.model.dora.shuffle_seed = shuffle_seed;
      r.train = train;
      r.train.seed = seed;
      runs.push_back(std::move(r));
    }
  return runs;
}

bool protocol_parity(const std::vector<OrderRun>& runs) {
  auto signature = [](const OrderRun& r) {
    ModelConfig m = r.model;
    m.dora.layer_order = LayerOrder::kNormal;
    return model_to_json(m).dump() + train_to_json(r.train).dump();
  };
  std::map<std::uint64_t, std::string> per_seed;
  for (const auto& r : runs) {
    if (r.train.seed != r.seed || r.model.dora.layer_order != r.order) return false;
    const auto sig = signature(r);
    const auto [it, fresh] = per_seed.emplace(r.seed, sig);
    if (!fresh && it->second != sig) return false;
  }
  return true;
}

#define DABS_INSTANTIATE_CONTROLS(T)                                                       \
  template RegionReport region_sweep(const DabsModel<T>&, const Corpus&, const RegionBands&, \
                                     const std::string&);                                  \
  template Rand2LReport rand2l_trials(const DabsModel<T>&, const Corpus&, std::size_t,      \
                                      std::uint64_t);                                       \
  template SingleLayerReport single_layer_controls(const DabsModel<T>&, const Corpus&);

DABS_INSTANTIATE_CONTROLS(float)
DABS_INSTANTIATE_CONTROLS(double)

}  // namespace dabs
