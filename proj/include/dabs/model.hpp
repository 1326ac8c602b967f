// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dabs/acbs.hpp"
#include "dabs/depth_mask.hpp"
#include "dabs/dora.hpp"
#include "dabs/encoder.hpp"

namespace dabs {

/// kEncoderOnly reads the span mean of the last layer through LayerNorm and a
/// linear classifier. kDoraOnly keeps the substrate but replaces all three
/// selectors by their uniform substitutes. kAcbsOnly keeps the selectors over
/// a substrate with neither local refinement nor depth recurrence.
enum class Architecture : std::uint8_t { kFull = 0, kEncoderOnly, kDoraOnly, kAcbsOnly };

std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  EncoderConfig encoder;
  DoraConfig dora;
  AcbsConfig acbs;
  Architecture architecture = Architecture::kFull;

  /// Switches implied by the architecture, applied on top of the sections.
  ModelConfig resolved() const;
  void validate() const;
};

/// Everything computed once per sentence.
template <typename T>
struct SentenceState {
  HiddenStack<T> stack;
  SentenceView<T> view;  // unused by the encoder-only architecture
  std::size_t n = 0;
};

template <typename T>
class DabsModel {
 public:
  DabsModel(const ModelConfig& cfg, std::uint64_t init_seed);

  SentenceState<T> prepare(std::span<const int> tokens, ForwardContext& ctx) const;
  AspectReadout<T> read(const SentenceState<T>& state, const AspectQuery& q,
                        ForwardContext& ctx, const DepthMask* mask = nullptr) const;

  /// Reuse: one prepare then M reads. Non-reuse: a full pass per aspect.
  std::vector<AspectReadout<T>> forward(std::span<const int> tokens,
                                        const std::vector<AspectQuery>& queries,
                                        ForwardContext& ctx, bool reuse = true,
                                        const DepthMask* mask = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const Encoder<T>& encoder() const { return encoder_; }
  const Dora<T>& dora() const { return dora_; }
  const Acbs<T>& acbs() const { return acbs_; }
  Acbs<T>& mutable_acbs() { return acbs_; }
  bool has_substrate() const { return cfg_.architecture != Architecture::kEncoderOnly; }
  std::size_t depth() const { return cfg_.dora.k; }

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  Encoder<T> encoder_;
  Dora<T> dora_;
  Acbs<T> acbs_;
  LayerNormAffine<T> baseline_norm_;
  Linear<T> baseline_classifier_;
};

}  // namespace dabs
