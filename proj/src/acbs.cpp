// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/acbs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "dabs/error.hpp"

namespace dabs {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kPositive: return "positive";
    case Label::kNeutral: return "neutral";
    case Label::kNegative: return "negative";
  }
  return "neutral";
}

Label parse_label(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "positive") return Label::kPositive;
  if (s == "neutral") return Label::kNeutral;
  if (s == "negative") return Label::kNegative;
  throw InputError("unknown sentiment label: " + std::string(name));
}

void AspectQuery::validate(std::size_t n) const {
  if (first < 1 || first > last || last > n)
    throw InputError("aspect span [" + std::to_string(first) + ", " + std::to_string(last) +
                     "] is invalid for a sentence of " + std::to_string(n) + " tokens");
}

void AcbsConfig::validate() const {
  if (!(tau_alpha > 0.0) || !(tau_g > 0.0)) throw ConfigError("acbs: temperatures must be > 0");
  if (!(eps > 0.0)) throw ConfigError("acbs: eps must be > 0");
  if (heads == 0) throw ConfigError("acbs: heads must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0 || classifier_dropout < 0.0 || classifier_dropout >= 1.0)
    throw ConfigError("acbs: dropout must lie in [0, 1)");
}

template <typename T>
Tensor<T> aspect_vector(const Tensor<T>& e, const AspectQuery& q) {
  q.validate(e.rows());
  return mean_rows(slice_rows(e, q.first - 1, q.last));
}

template <typename T>
Tensor<T> pool_tokens(const Tensor<T>& context, const Tensor<T>& w, double eps) {
  return div_scalar(matmul(w, context), add_scalar(sum(w), static_cast<T>(eps)));
}

template <typename T>
Tensor<T> pool_depth(const Tensor<T>& alpha, const Tensor<T>& level_means) {
  return matmul(alpha, level_means);
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& g, const Tensor<T>& c_hat, const Tensor<T>& d_hat,
               const Tensor<T>& a_hat) {
  return matmul(g, concat_rows(std::vector<Tensor<T>>{reshape(c_hat, {1, c_hat.numel()}),
                                                      reshape(d_hat, {1, d_hat.numel()}),
                                                      reshape(a_hat, {1, a_hat.numel()})}));
}

template <typename T>
std::size_t AspectReadout<T>::prediction() const {
  const auto p = probs.data();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  if (!t.defined()) return {};
  const auto s = t.data();
  return {s.begin(), s.end()};
}

template <typename T>
Tensor<T> uniform(std::size_t k) {
  return Tensor<T>::full({k}, T(1) / static_cast<T>(k));
}

}  // namespace

template <typename T>
SelectionTrace make_trace(const AspectReadout<T>& r, const AspectQuery& q,
                          const std::string& sentence_id) {
  SelectionTrace t;
  t.sentence_id = sentence_id;
  t.first = q.first;
  t.last = q.last;
  t.w = to_doubles(r.w);
  t.alpha = to_doubles(r.alpha);
  t.g = to_doubles(r.g);
  t.logits = to_doubles(r.logits);
  t.probs = to_doubles(r.probs);
  t.prediction = static_cast<Label>(r.prediction());
  t.gold = q.label;
  return t;
}

void write_trace_jsonl(std::ostream& out, const SelectionTrace& trace) {
  nlohmann::json j;
  j["sentence_id"] = trace.sentence_id;
  j["span"] = {trace.first, trace.last};
  j["w"] = trace.w;
  j["alpha"] = trace.alpha;
  j["g"] = trace.g;
  j["logits"] = trace.logits;
  j["prediction"] = label_name(trace.prediction);
  j["gold"] = trace.gold ? nlohmann::json(label_name(*trace.gold)) : nlohmann::json(nullptr);
  out << j.dump() << '\n';
}

template <typename T>
Acbs<T>::Acbs(const AcbsConfig& cfg, std::size_t d, std::size_t k, ParameterSet<T>& params,
              Rng& init_rng)
    : cfg_(cfg), d_(d), k_(k) {
  cfg_.validate();
  if (d % cfg_.heads != 0)
    throw ConfigError("acbs: width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(cfg_.heads) + " heads");
  mha_ = MultiHeadAttention<T>::create(params, "acbs.context", d, cfg_.heads, init_rng);
  token_mlp_ = Mlp<T>::create(params, "acbs.token", 2 * d, d, 1, cfg_.dropout, init_rng);
  depth_mlp_ = Mlp<T>::create(params, "acbs.depth", 2 * d, d, k, cfg_.dropout, init_rng);
  fusion_mlp_ = Mlp<T>::create(params, "acbs.fusion", 3 * d, d, 3, cfg_.dropout, init_rng);
  norm_c_ = LayerNormAffine<T>::create(params, "acbs.fusion.norm_c", d, init_rng);
  norm_d_ = LayerNormAffine<T>::create(params, "acbs.fusion.norm_d", d, init_rng);
  norm_a_ = LayerNormAffine<T>::create(params, "acbs.fusion.norm_a", d, init_rng);
  classifier_ = Linear<T>::create(params, "acbs.classifier", d, kNumLabels, init_rng);
}

template <typename T>
Tensor<T> Acbs<T>::reorganize_context(const Tensor<T>& e,
                                      std::vector<Tensor<T>>* attention) const {
  return mha_(e, attention);
}

template <typename T>
SentenceView<T> Acbs<T>::prepare(DepthSubstrate<T> substrate) const {
  SentenceView<T> v;
  v.context = reorganize_context(substrate.enhanced);
  v.context_mean = mean_rows(v.context);
  std::vector<Tensor<T>> means;
  means.reserve(substrate.depth());
  for (const auto& level : substrate.levels)
    means.push_back(reshape(mean_rows(level), {1, level.cols()}));
  v.level_means = concat_rows(means);
  v.substrate = std::move(substrate);
  return v;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Acbs<T>::token_select(const Tensor<T>& context,
                                                      const Tensor<T>& a,
                                                      ForwardContext& ctx) const {
  const std::size_t n = context.rows();
  if (!cfg_.use_token_sel) return {Tensor<T>::full({n}, T(1)), mean_rows(context)};
  // [C_t; a] W1 splits into C_t W1_top + a W1_bottom, so the aspect half is
  // computed once instead of per token.
  const Tensor<T>& w1 = token_mlp_.first.weight;
  Tensor<T> aspect_part = add(matmul(a, slice_rows(w1, d_, 2 * d_)), token_mlp_.first.bias);
  Tensor<T> hidden = gelu(add_bias(matmul(context, slice_rows(w1, 0, d_)), aspect_part));
  hidden = maybe_dropout(hidden, token_mlp_.dropout, ctx);
  Tensor<T> w = sigmoid(reshape(token_mlp_.second(hidden), {n}));
  return {w, pool_tokens(context, w, cfg_.eps)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Acbs<T>::depth_select(const Tensor<T>& level_means,
                                                      const Tensor<T>& a,
                                                      const Tensor<T>& context_mean,
                                                      ForwardContext& ctx) const {
  Tensor<T> alpha;
  if (cfg_.use_layer_sel) {
    Tensor<T> logits = depth_mlp_(concat_cols(std::vector<Tensor<T>>{a, context_mean}), ctx);
    alpha = softmax(logits, static_cast<T>(cfg_.tau_alpha));
  } else {
    alpha = uniform<T>(level_means.rows());
  }
  return {alpha, pool_depth(alpha, level_means)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Acbs<T>::gated_fusion(const Tensor<T>& c,
                                                      const Tensor<T>& depth,
                                                      const Tensor<T>& a,
                                                      ForwardContext& ctx) const {
  Tensor<T> c_hat = norm_c_(c), d_hat = norm_d_(depth), a_hat = norm_a_(a);
  Tensor<T> g;
  if (cfg_.use_gated_fusion) {
    Tensor<T> logits = fusion_mlp_(concat_cols(std::vector<Tensor<T>>{c_hat, d_hat, a_hat}), ctx);
    g = softmax(logits, static_cast<T>(cfg_.tau_g));
  } else {
    g = uniform<T>(3);
  }
  return {g, fuse(g, c_hat, d_hat, a_hat)};
}

template <typename T>
Tensor<T> Acbs<T>::classify(const Tensor<T>& h, ForwardContext& ctx) const {
  return classifier_(maybe_dropout(h, cfg_.classifier_dropout, ctx));
}

template <typename T>
AspectReadout<T> Acbs<T>::read_aspect(const SentenceView<T>& view, const AspectQuery& q,
                                      ForwardContext& ctx, const DepthMask* mask) const {
  AspectReadout<T> r;
  r.aspect = aspect_vector(view.substrate.enhanced, q);
  std::tie(r.w, r.pooled) = token_select(view.context, r.aspect, ctx);
  std::tie(r.alpha, r.depth) = depth_select(view.level_means, r.aspect, view.context_mean, ctx);
  if (mask) {
    r.alpha = apply_depth_mask(r.alpha, *mask);
    r.depth = pool_depth(r.alpha, view.level_means);
  }
  std::tie(r.g, r.h) = gated_fusion(r.pooled, r.depth, r.aspect, ctx);
  r.logits = classify(r.h, ctx);
  r.probs = softmax(r.logits);
  r.learned_w = cfg_.use_token_sel;
  r.learned_g = cfg_.use_gated_fusion;
  return r;
}

#define DABS_INSTANTIATE_ACBS(T)                                                          \
  template Tensor<T> aspect_vector(const Tensor<T>&, const AspectQuery&);                 \
  template Tensor<T> pool_tokens(const Tensor<T>&, const Tensor<T>&, double);             \
  template Tensor<T> pool_depth(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                          const Tensor<T>&);                                              \
  template struct AspectReadout<T>;                                                       \
  template SelectionTrace make_trace(const AspectReadout<T>&, const AspectQuery&,         \
                                     const std::string&);                                 \
  template class Acbs<T>;

DABS_INSTANTIATE_ACBS(float)
DABS_INSTANTIATE_ACBS(double)

}  // namespace dabs
