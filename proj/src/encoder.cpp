// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/encoder.hpp"

#include <cmath>

#include "dabs/error.hpp"

namespace dabs {

void EncoderConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("encoder: vocab_size must be at least 2");
  if (d == 0 || layers == 0 || heads == 0 || ffn_mult == 0 || max_len == 0)
    throw ConfigError("encoder: sizes must be positive");
  if (d % heads != 0)
    throw ConfigError("encoder: d = " + std::to_string(d) +
                      " is not divisible by heads = " + std::to_string(heads));
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("encoder: dropout must lie in [0, 1)");
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d) {
  std::vector<T> pe(n * d);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c) {
      const double i2 = static_cast<double>(c - c % 2);
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, i2 / static_cast<double>(d));
      pe[t * d + c] = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return Tensor<T>::from({n, d}, std::move(pe));
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, ParameterSet<T>& params,
                    Rng& init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  embedding_ = params.create("encoder.embedding", {cfg.vocab_size, cfg.d},
                             Init::normal(1.0), init_rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l + 1);
    Block b;
    b.attn_norm = LayerNormAffine<T>::create(params, p + ".attn_norm", cfg.d, init_rng);
    b.attn = MultiHeadAttention<T>::create(params, p + ".attn", cfg.d, cfg.heads, init_rng);
    b.ffn_norm = LayerNormAffine<T>::create(params, p + ".ffn_norm", cfg.d, init_rng);
    b.ffn = Mlp<T>::create(params, p + ".ffn", cfg.d, cfg.d * cfg.ffn_mult, cfg.d,
                           0.0, init_rng);
    blocks_.push_back(std::move(b));
  }
}

template <typename T>
HiddenStack<T> Encoder<T>::encode(std::span<const int> tokens, ForwardContext& ctx,
                                  AttentionMaps<T>* attention) const {
  const std::size_t n = tokens.size();
  if (n == 0) throw InputError("encode: empty token sequence");
  if (n > cfg_.max_len)
    throw InputError("encode: sequence of " + std::to_string(n) +
                     " tokens exceeds max_len " + std::to_string(cfg_.max_len));
  for (int id : tokens)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
      throw InputError("encode: token id " + std::to_string(id) +
                       " outside vocabulary of " + std::to_string(cfg_.vocab_size));

  Tensor<T> x = add(gather_rows(embedding_, tokens), sinusoidal_positions<T>(n, cfg_.d));
  x = maybe_dropout(x, cfg_.dropout, ctx);

  HiddenStack<T> stack;
  stack.n = n;
  stack.states.reserve(blocks_.size());
  if (attention) attention->clear();
  for (const Block& b : blocks_) {
    std::vector<Tensor<T>> maps;
    Tensor<T> a = b.attn(b.attn_norm(x), attention ? &maps : nullptr);
    x = add(x, maybe_dropout(a, cfg_.dropout, ctx));
    Tensor<T> f = b.ffn(b.ffn_norm(x), ctx);
    x = add(x, maybe_dropout(f, cfg_.dropout, ctx));
    stack.states.push_back(x);
    if (attention) attention->push_back(std::move(maps));
  }
  return stack;
}

template class Encoder<float>;
template class Encoder<double>;
template Tensor<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions<double>(std::size_t, std::size_t);

}  // namespace dabs
