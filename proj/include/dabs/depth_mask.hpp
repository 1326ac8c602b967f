// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dabs/tensor.hpp"

namespace dabs {

/// Inference-time restriction of the depth distribution to a subset of the
/// K substrate levels (1-based indices).
struct DepthMask {
  std::vector<std::size_t> allowed;

  static DepthMask band(std::size_t first, std::size_t last);
  static DepthMask full(std::size_t k) { return band(1, k); }
  bool contains(std::size_t level) const;
  /// Throws ConfigError when empty or an index falls outside 1..k.
  void validate(std::size_t k) const;
  std::string str() const;
};

/// Zeroes alpha outside the mask and renormalizes; when no mass survives the
/// result is uniform over the allowed levels.
std::vector<double> apply_depth_mask(const std::vector<double>& alpha, const DepthMask& mask);

/// Tensor form. The result is a constant (no gradient flows back to alpha).
template <typename T>
Tensor<T> apply_depth_mask(const Tensor<T>& alpha, const DepthMask& mask);

}  // namespace dabs
