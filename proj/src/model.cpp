// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/model.hpp"

#include "dabs/error.hpp"

namespace dabs {

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kFull: return "full";
    case Architecture::kEncoderOnly: return "encoder_only";
    case Architecture::kDoraOnly: return "dora_only";
    case Architecture::kAcbsOnly: return "acbs_only";
  }
  return "full";
}

Architecture parse_architecture(std::string_view name) {
  for (auto a : {Architecture::kFull, Architecture::kEncoderOnly, Architecture::kDoraOnly,
                 Architecture::kAcbsOnly})
    if (architecture_name(a) == name) return a;
  throw ConfigError("unknown architecture: " + std::string(name));
}

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  switch (architecture) {
    case Architecture::kFull:
    case Architecture::kEncoderOnly:
      break;
    case Architecture::kDoraOnly:
      c.acbs.use_token_sel = c.acbs.use_layer_sel = c.acbs.use_gated_fusion = false;
      break;
    case Architecture::kAcbsOnly:
      c.dora.use_lcp = c.dora.use_depth_gru = false;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  encoder.validate();
  dora.validate(encoder.layers);
  acbs.validate();
  if (encoder.d % acbs.heads != 0)
    throw ConfigError("acbs heads must divide d = " + std::to_string(encoder.d));
}

template <typename T>
DabsModel<T>::DabsModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg.resolved()) {
  cfg_.validate();
  Rng rng(init_seed);
  encoder_ = Encoder<T>(cfg_.encoder, params_, rng);
  const std::size_t d = cfg_.encoder.d;
  if (has_substrate()) {
    dora_ = Dora<T>(cfg_.dora, d, cfg_.encoder.layers, params_, rng);
    acbs_ = Acbs<T>(cfg_.acbs, d, cfg_.dora.k, params_, rng);
  } else {
    baseline_norm_ = LayerNormAffine<T>::create(params_, "baseline.norm", d, rng);
    baseline_classifier_ = Linear<T>::create(params_, "baseline.classifier", d, kNumLabels, rng);
  }
}

template <typename T>
SentenceState<T> DabsModel<T>::prepare(std::span<const int> tokens, ForwardContext& ctx) const {
  SentenceState<T> s;
  s.stack = encoder_.encode(tokens, ctx);
  s.n = tokens.size();
  if (has_substrate()) s.view = acbs_.prepare(dora_.build_substrate(s.stack, ctx));
  return s;
}

template <typename T>
AspectReadout<T> DabsModel<T>::read(const SentenceState<T>& state, const AspectQuery& q,
                                    ForwardContext& ctx, const DepthMask* mask) const {
  if (has_substrate()) return acbs_.read_aspect(state.view, q, ctx, mask);
  AspectReadout<T> r;
  r.aspect = aspect_vector(state.stack.states.back(), q);
  r.h = baseline_norm_(r.aspect);
  r.logits = baseline_classifier_(maybe_dropout(r.h, cfg_.acbs.classifier_dropout, ctx));
  r.probs = softmax(r.logits);
  return r;
}

template <typename T>
std::vector<AspectReadout<T>> DabsModel<T>::forward(std::span<const int> tokens,
                                                    const std::vector<AspectQuery>& queries,
                                                    ForwardContext& ctx, bool reuse,
                                                    const DepthMask* mask) const {
  std::vector<AspectReadout<T>> out;
  out.reserve(queries.size());
  if (reuse) {
    const SentenceState<T> state = prepare(tokens, ctx);
    for (const auto& q : queries) out.push_back(read(state, q, ctx, mask));
  } else {
    for (const auto& q : queries) out.push_back(read(prepare(tokens, ctx), q, ctx, mask));
  }
  return out;
}

template class DabsModel<float>;
template class DabsModel<double>;

}  // namespace dabs
