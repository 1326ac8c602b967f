// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Aspect-conditioned budgeted selection: the per-aspect readout over a
// shared depth substrate.
//
//   a   = mean of E over the aspect span
//   w_t = sigmoid(MLP([C_t; a])),   c = sum_t w_t C_t / (sum_t w_t + eps)
//   alpha = softmax(MLP([a; mean_t C_t]) / tau_alpha)
//   D   = sum_u alpha_u * mean_t level_u
//   g   = softmax(MLP([LN(c); LN(D); LN(a)]) / tau_g)
//   h   = g_1 LN(c) + g_2 LN(D) + g_3 LN(a),   logits = Linear(h)

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dabs/depth_mask.hpp"
#include "dabs/dora.hpp"
#include "dabs/layers.hpp"

namespace dabs {

enum class Label : std::uint8_t { kPositive = 0, kNeutral = 1, kNegative = 2 };
inline constexpr std::size_t kNumLabels = 3;

std::string_view label_name(Label label);
/// Accepts "positive", "neutral", "negative" (case-insensitive). InputError otherwise.
Label parse_label(std::string_view name);

/// Token interval [first, last], 1-based and inclusive.
struct AspectQuery {
  std::size_t first = 1;
  std::size_t last = 1;
  std::optional<Label> label;

  std::size_t length() const { return last - first + 1; }
  /// Throws InputError unless 1 <= first <= last <= n.
  void validate(std::size_t n) const;
};

struct AcbsConfig {
  double tau_alpha = 1.0;
  double tau_g = 1.0;
  double eps = 1e-6;
  std::size_t heads = 4;
  bool use_token_sel = true;
  bool use_layer_sel = true;
  bool use_gated_fusion = true;
  double dropout = 0.1;
  double classifier_dropout = 0.2;

  void validate() const;
};

// Pure pieces of the readout, exposed for oracle tests.
template <typename T>
Tensor<T> aspect_vector(const Tensor<T>& e, const AspectQuery& q);
/// c = sum_t w_t C_t / (sum_t w_t + eps).
template <typename T>
Tensor<T> pool_tokens(const Tensor<T>& context, const Tensor<T>& w, double eps);
/// D = sum_u alpha_u level_means[u].
template <typename T>
Tensor<T> pool_depth(const Tensor<T>& alpha, const Tensor<T>& level_means);
/// h = sum_i g_i parts[i].
template <typename T>
Tensor<T> fuse(const Tensor<T>& g, const Tensor<T>& c_hat, const Tensor<T>& d_hat,
               const Tensor<T>& a_hat);

/// Sentence-level quantities shared by every aspect of one sentence.
template <typename T>
struct SentenceView {
  DepthSubstrate<T> substrate;
  Tensor<T> context;       // C, [n x d]
  Tensor<T> context_mean;  // mean_t C_t, [d]
  Tensor<T> level_means;   // [K x d], row u = mean_t level_u

  std::size_t n() const { return context.rows(); }
};

template <typename T>
struct AspectReadout {
  Tensor<T> aspect;  // a
  Tensor<T> w;       // [n]
  Tensor<T> pooled;  // c
  Tensor<T> alpha;   // [K]
  Tensor<T> depth;   // D
  Tensor<T> g;       // [3]
  Tensor<T> h;
  Tensor<T> logits;  // [3]
  Tensor<T> probs;   // [3]
  // False when the selector is ablated and w or g is a fixed substitute.
  bool learned_w = false;
  bool learned_g = false;

  std::size_t prediction() const;
};

/// Plain-value record of one readout, the unit of analysis export.
struct SelectionTrace {
  std::string sentence_id;
  std::size_t first = 0, last = 0;
  std::vector<double> w, alpha, g, logits, probs;
  Label prediction = Label::kNeutral;
  std::optional<Label> gold;
};

template <typename T>
SelectionTrace make_trace(const AspectReadout<T>& r, const AspectQuery& q,
                          const std::string& sentence_id);
/// One JSON object per line.
void write_trace_jsonl(std::ostream& out, const SelectionTrace& trace);

template <typename T>
class Acbs {
 public:
  Acbs() = default;
  Acbs(const AcbsConfig& cfg, std::size_t d, std::size_t k, ParameterSet<T>& params,
       Rng& init_rng);

  Tensor<T> reorganize_context(const Tensor<T>& e,
                               std::vector<Tensor<T>>* attention = nullptr) const;
  /// Builds C and the per-level token means once per sentence.
  SentenceView<T> prepare(DepthSubstrate<T> substrate) const;

  /// Returns (w, c).
  std::pair<Tensor<T>, Tensor<T>> token_select(const Tensor<T>& context, const Tensor<T>& a,
                                               ForwardContext& ctx) const;
  /// Returns (alpha, D).
  std::pair<Tensor<T>, Tensor<T>> depth_select(const Tensor<T>& level_means,
                                               const Tensor<T>& a,
                                               const Tensor<T>& context_mean,
                                               ForwardContext& ctx) const;
  /// Returns (g, h).
  std::pair<Tensor<T>, Tensor<T>> gated_fusion(const Tensor<T>& c, const Tensor<T>& depth,
                                               const Tensor<T>& a, ForwardContext& ctx) const;
  Tensor<T> classify(const Tensor<T>& h, ForwardContext& ctx) const;

  /// Pure with respect to `view`; safe to call for many aspects of one sentence.
  /// A non-null mask restricts alpha before the depth summary is pooled.
  AspectReadout<T> read_aspect(const SentenceView<T>& view, const AspectQuery& q,
                               ForwardContext& ctx, const DepthMask* mask = nullptr) const;

  const AcbsConfig& config() const { return cfg_; }
  AcbsConfig& mutable_config() { return cfg_; }
  const MultiHeadAttention<T>& attention() const { return mha_; }
  const Mlp<T>& token_mlp() const { return token_mlp_; }
  const Mlp<T>& depth_mlp() const { return depth_mlp_; }
  const Mlp<T>& fusion_mlp() const { return fusion_mlp_; }
  const Linear<T>& classifier() const { return classifier_; }

 private:
  AcbsConfig cfg_;
  std::size_t d_ = 0;
  std::size_t k_ = 0;
  MultiHeadAttention<T> mha_;
  Mlp<T> token_mlp_;  // 2d -> d -> 1
  Mlp<T> depth_mlp_;  // 2d -> d -> K
  Mlp<T> fusion_mlp_; // 3d -> d -> 3
  LayerNormAffine<T> norm_c_, norm_d_, norm_a_;
  Linear<T> classifier_;
};

}  // namespace dabs
