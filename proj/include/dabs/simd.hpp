// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Data-parallel inner loops used by the tensor ops. Every kernel has a
// portable scalar reference and, where the build and CPU allow, an AVX2/FMA
// variant. The variant is picked once at startup (override with the
// DABS_SIMD environment variable: "scalar" or "avx2").

#include <cstddef>
#include <span>
#include <string_view>

namespace dabs::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by both this build and the running CPU.
Isa detected_isa();

/// Instruction set used by the dispatching wrappers below.
Isa active_isa();

/// Throws DomainError when `isa` is not supported on this host.
void set_active_isa(Isa isa);

bool isa_supported(Isa isa);

template <typename T>
struct KernelTable {
  /// sum_i x[i] * y[i]
  T (*dot)(const T* x, const T* y, std::size_t n);
  /// y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  /// c[m x p] += a[m x k] * b[k x p]
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t p, const T* a,
                  const T* b, T* c);
  /// c[m x p] += a[m x k] * b[p x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t p, const T* a,
                  const T* b, T* c);
  /// c[k x p] += a[m x k]^T * b[m x p]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t p, const T* a,
                  const T* b, T* c);
};

/// Kernel table for a specific instruction set (must be supported).
template <typename T>
const KernelTable<T>& kernels(Isa isa);

template <typename T>
const KernelTable<T>& active_kernels() {
  return kernels<T>(active_isa());
}

template <typename T>
T dot(std::span<const T> x, std::span<const T> y) {
  return active_kernels<T>().dot(x.data(), y.data(), x.size());
}

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  active_kernels<T>().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
template <typename T>
const KernelTable<T>& scalar_table();
#if defined(DABS_HAVE_AVX2)
template <typename T>
const KernelTable<T>& avx2_table();
#endif
}  // namespace detail

}  // namespace dabs::simd
