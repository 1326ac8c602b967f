// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Differentiable tensor operations. Matrices are rank-2 row-major; most ops
// treat a tensor as (rows x cols) where cols is the last extent. All ops are
// instantiated for float and double.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dabs/tensor.hpp"

namespace dabs {

/// a[m x k] (or a vector [k]) times b[k x p]. A vector input yields [p].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// a[m x k] times the transpose of b[p x k], giving [m x p].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
/// Elementwise product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// x[... x d] + bias[d], broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
/// x times a one-element tensor (differentiable in both).
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s);
/// x divided by a one-element tensor (differentiable in both).
template <typename T>
Tensor<T> div_scalar(const Tensor<T>& x, const Tensor<T>& s);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// Column means of x[n x d], giving [d].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x);

/// Normalizes the last axis to zero mean / unit population variance
/// (stabilizer `eps` inside the square root), then gain * x + bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = T(1e-5));

/// softmax(x / temperature) over the last axis. temperature <= 0 is a
/// DomainError.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, T temperature = T(1));

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
/// tanh approximation of GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Concatenates along the last axis; all inputs share the row count.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
/// Stacks along rows; vectors [d] count as one row. Result is [R x d].
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

/// Rows [begin, end) of x[n x d] as [(end - begin) x d].
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
/// Columns [begin, end) of x[n x d].
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Embedding lookup: rows of table[V x d] selected by ids, giving [n x d].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids);

/// Per-channel 1-D convolution of x[n x d] with kernel[k x d], zero
/// "same" padding. k must be odd (DomainError otherwise).
template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel);

/// Inverted dropout. Identity when !training or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T p, std::mt19937_64& rng,
                  bool training);

/// -log softmax(logits)[gold] for a logit vector.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t gold);

}  // namespace dabs
