// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Depth-ordered representation aggregation: builds the per-sentence depth
// substrate that every aspect query reads from.
//
//   local refinement   E = LayerNorm(concat_k conv_k(H_L) * W_c + H_L)
//   depth recurrence   s_1 = x_1,  s_u = GRU(x_u, s_{u-1})
//                      level_1 = LayerNorm(beta * s_1 + x_1)
//                      level_u = LayerNorm(s_u + x_u),  u = 2..K
//
// where x_1..x_K are the last K encoder layers, optionally permuted by the
// layer-order control.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dabs/encoder.hpp"
#include "dabs/layers.hpp"

namespace dabs {

enum class LayerOrder : std::uint8_t { kNormal = 0, kReversed = 1, kShuffled = 2 };

std::string_view layer_order_name(LayerOrder order);
/// Accepts "normal", "reversed", "shuffled". ConfigError otherwise.
LayerOrder parse_layer_order(std::string_view name);

/// perm[u] is the index (0-based, shallow to deep within the last K
/// layers) of the encoder layer fed at recurrence step u.
std::vector<std::size_t> layer_order_permutation(LayerOrder order, std::size_t k,
                                                 std::uint64_t seed);

struct DoraConfig {
  std::size_t k = 6;
  std::vector<std::size_t> kernel_sizes{1, 3, 5};
  double beta_init = 1.0;
  LayerOrder layer_order = LayerOrder::kNormal;
  std::uint64_t shuffle_seed = 0;
  bool use_depth_gru = true;
  bool use_lcp = true;
  double dropout = 0.1;

  /// Throws ConfigError (even kernel, K outside [1, L], ...).
  void validate(std::size_t encoder_layers) const;
};

template <typename T>
struct DepthSubstrate {
  Tensor<T> enhanced;             // E, [n x d]
  std::vector<Tensor<T>> levels;  // K entries, [n x d], shallow to deep

  std::size_t depth() const { return levels.size(); }
};

template <typename T>
class Dora {
 public:
  Dora() = default;
  Dora(const DoraConfig& cfg, std::size_t d, std::size_t encoder_layers,
       ParameterSet<T>& params, Rng& init_rng);

  Tensor<T> lcp_refine(const Tensor<T>& last_layer, ForwardContext& ctx) const;
  /// K outputs ordered u = 1..K. Throws ConfigError when K > L.
  std::vector<Tensor<T>> depth_gru(const HiddenStack<T>& stack, ForwardContext& ctx) const;
  DepthSubstrate<T> build_substrate(const HiddenStack<T>& stack, ForwardContext& ctx) const;

  const DoraConfig& config() const { return cfg_; }
  const Tensor<T>& beta() const { return beta_; }
  const GruParams<T>& gru() const { return gru_; }
  const std::vector<std::size_t>& permutation() const { return perm_; }

 private:
  DoraConfig cfg_;
  std::vector<Tensor<T>> conv_kernels_;  // one [k x d] per kernel size
  Tensor<T> proj_;                       // W_c, [(#kernels * d) x d]
  LayerNormAffine<T> lcp_norm_;
  GruParams<T> gru_;
  Tensor<T> beta_;
  std::vector<LayerNormAffine<T>> level_norms_;
  std::vector<std::size_t> perm_;
};

template <typename T>
void save_substrate(const DepthSubstrate<T>& s, LayerOrder order, const std::string& path);
/// Returns the substrate and the layer order stored in the flag byte.
template <typename T>
DepthSubstrate<T> load_substrate(const std::string& path, LayerOrder* order = nullptr);

}  // namespace dabs
