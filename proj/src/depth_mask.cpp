// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/depth_mask.hpp"

#include <algorithm>

#include "dabs/error.hpp"

namespace dabs {

DepthMask DepthMask::band(std::size_t first, std::size_t last) {
  DepthMask m;
  for (std::size_t u = first; u <= last; ++u) m.allowed.push_back(u);
  return m;
}

bool DepthMask::contains(std::size_t level) const {
  return std::find(allowed.begin(), allowed.end(), level) != allowed.end();
}

void DepthMask::validate(std::size_t k) const {
  if (allowed.empty()) throw ConfigError("depth mask is empty");
  for (auto u : allowed)
    if (u < 1 || u > k)
      throw ConfigError("depth mask index " + std::to_string(u) + " outside 1.." +
                        std::to_string(k));
}

std::string DepthMask::str() const {
  std::string s = "{";
  for (std::size_t i = 0; i < allowed.size(); ++i)
    s += (i ? "," : "") + std::to_string(allowed[i]);
  return s + "}";
}

std::vector<double> apply_depth_mask(const std::vector<double>& alpha, const DepthMask& mask) {
  mask.validate(alpha.size());
  std::vector<double> out(alpha.size(), 0.0);
  double total = 0.0;
  for (std::size_t u = 0; u < alpha.size(); ++u)
    if (mask.contains(u + 1)) {
      out[u] = alpha[u];
      total += alpha[u];
    }
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  } else {
    const double share = 1.0 / static_cast<double>(mask.allowed.size());
    for (std::size_t u = 0; u < out.size(); ++u) out[u] = mask.contains(u + 1) ? share : 0.0;
  }
  return out;
}

template <typename T>
Tensor<T> apply_depth_mask(const Tensor<T>& alpha, const DepthMask& mask) {
  const auto a = alpha.data();
  const auto out = apply_depth_mask(std::vector<double>(a.begin(), a.end()), mask);
  std::vector<T> values(out.begin(), out.end());
  return Tensor<T>::from(alpha.shape(), std::move(values));
}

template Tensor<float> apply_depth_mask(const Tensor<float>&, const DepthMask&);
template Tensor<double> apply_depth_mask(const Tensor<double>&, const DepthMask&);

}  // namespace dabs
