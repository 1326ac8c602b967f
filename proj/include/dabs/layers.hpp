// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Parameter registry and the small building blocks shared by the encoder,
// DORA and ACBS: affine maps, two-layer GELU MLPs, layer-norm affines, the
// GRU cell and multi-head self-attention.

#include <cstddef>
#include <string>
#include <vector>

#include "dabs/ops.hpp"
#include "dabs/random.hpp"
#include "dabs/tensor.hpp"

namespace dabs {

enum class InitKind { kZeros, kOnes, kXavier, kNormal, kConstant };

struct Init {
  InitKind kind = InitKind::kZeros;
  double scale = 0.0;  // stddev for kNormal, the value for kConstant
  static Init zeros() { return {InitKind::kZeros, 0.0}; }
  static Init ones() { return {InitKind::kOnes, 0.0}; }
  static Init xavier() { return {InitKind::kXavier, 0.0}; }
  static Init normal(double stddev) { return {InitKind::kNormal, stddev}; }
  static Init constant(double v) { return {InitKind::kConstant, v}; }
};

/// Owns the named trainable tensors of one model. Names are unique.
template <typename T>
class ParameterSet {
 public:
  Tensor<T> create(const std::string& name, Shape shape, Init init, Rng& rng);

  const std::vector<Parameter<T>>& items() const { return items_; }
  std::vector<Parameter<T>>& items() { return items_; }
  /// Throws InputError when absent.
  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter<T>> items_;
};

/// Per-forward settings: training toggles dropout, which draws from `rng`.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, double p, ForwardContext& ctx);

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in x out]
  Tensor<T> bias;    // [out], undefined when the map has no bias

  static Linear create(ParameterSet<T>& ps, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// in -> hidden (GELU, dropout) -> out.
template <typename T>
struct Mlp {
  Linear<T> first;
  Linear<T> second;
  double dropout = 0.0;

  static Mlp create(ParameterSet<T>& ps, const std::string& name,
                    std::size_t in, std::size_t hidden, std::size_t out,
                    double dropout, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x, ForwardContext& ctx) const;
};

template <typename T>
struct LayerNormAffine {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNormAffine create(ParameterSet<T>& ps, const std::string& name,
                                std::size_t d, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const {
    return layer_norm(x, gain, bias);
  }
};

/// Gated recurrent cell, row-batched: x[rows x d_in], h[rows x d].
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   n = tanh(x Wn + r * (h Un) + bn)
///   out = (1 - z) * n + z * h
template <typename T>
struct GruParams {
  Tensor<T> w_z, w_r, w_n;  // [d_in x d]
  Tensor<T> u_z, u_r, u_n;  // [d x d]
  Tensor<T> b_z, b_r, b_n;  // [d]

  static GruParams create(ParameterSet<T>& ps, const std::string& name,
                          std::size_t d_in, std::size_t d, Rng& rng);
};

/// Intermediate gate values, exposed for tests.
template <typename T>
struct GruTrace {
  Tensor<T> update;     // z
  Tensor<T> reset;      // r
  Tensor<T> candidate;  // n
};

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h,
                   const GruParams<T>& p, GruTrace<T>* trace = nullptr);

/// Scaled dot-product multi-head self-attention with output projection.
template <typename T>
struct MultiHeadAttention {
  Linear<T> query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParameterSet<T>& ps, const std::string& name,
                                   std::size_t d, std::size_t heads, Rng& rng);
  /// When `weights` is non-null it receives one [n x n] matrix per head.
  Tensor<T> operator()(const Tensor<T>& x,
                       std::vector<Tensor<T>>* weights = nullptr) const;
};

}  // namespace dabs
