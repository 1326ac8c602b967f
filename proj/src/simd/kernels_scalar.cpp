// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/simd.hpp"

namespace dabs::simd::detail {
namespace {

template <typename T>
T dot_scalar(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void axpy_scalar(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_nn_scalar(std::size_t m, std::size_t k, std::size_t p, const T* a,
                    const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = a[i * k + kk];
      const T* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <typename T>
void gemm_nt_scalar(std::size_t m, std::size_t k, std::size_t p, const T* a,
                    const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      c[i * p + j] += dot_scalar(a + i * k, b + j * k, k);
}

template <typename T>
void gemm_tn_scalar(std::size_t m, std::size_t k, std::size_t p, const T* a,
                    const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk)
      axpy_scalar(a[i * k + kk], b + i * p, c + kk * p, p);
}

}  // namespace

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> table{&dot_scalar<T>, &axpy_scalar<T>,
                                    &gemm_nn_scalar<T>, &gemm_nt_scalar<T>,
                                    &gemm_tn_scalar<T>};
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace dabs::simd::detail
