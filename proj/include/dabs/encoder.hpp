// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dabs/layers.hpp"

namespace dabs {

struct EncoderConfig {
  std::size_t vocab_size = 2048;
  std::size_t d = 64;
  std::size_t layers = 8;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t max_len = 64;
  double dropout = 0.1;

  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
};

/// Post-block state of every encoder layer, shallow to deep.
template <typename T>
struct HiddenStack {
  std::vector<Tensor<T>> states;  // L entries, each [n x d]
  std::size_t n = 0;

  std::size_t layers() const { return states.size(); }
  std::size_t width() const { return states.empty() ? 0 : states[0].cols(); }
};

/// Attention weights of one forward pass: [layer][head] -> [n x n].
template <typename T>
using AttentionMaps = std::vector<std::vector<Tensor<T>>>;

/// Sinusoidal position table [n x d] (sin on even, cos on odd columns).
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d);

/// Token embedding plus sinusoidal positions, then L pre-norm transformer
/// blocks (self-attention and GELU feed-forward, each residual).
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, ParameterSet<T>& params, Rng& init_rng);

  /// Throws InputError for an empty sequence, one longer than max_len, or
  /// an out-of-vocabulary id.
  HiddenStack<T> encode(std::span<const int> tokens, ForwardContext& ctx,
                        AttentionMaps<T>* attention = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    LayerNormAffine<T> attn_norm;
    MultiHeadAttention<T> attn;
    LayerNormAffine<T> ffn_norm;
    Mlp<T> ffn;
  };

  EncoderConfig cfg_;
  Tensor<T> embedding_;
  std::vector<Block> blocks_;
};

/// Binary stack files: see checkpoint.hpp for the record layout.
template <typename T>
void save_stack(const HiddenStack<T>& stack, const std::string& path);
template <typename T>
HiddenStack<T> load_stack(const std::string& path);

}  // namespace dabs
