// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "dabs/simd.hpp"

namespace dabs::simd::detail {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t kLanes = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t kLanes = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <typename S>
typename S::T dot_avx2(const typename S::T* x, const typename S::T* y,
                       std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  auto acc0 = S::zero();
  auto acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = S::fmadd(S::load(x + i), S::load(y + i), acc0);
    acc1 = S::fmadd(S::load(x + i + W), S::load(y + i + W), acc1);
  }
  for (; i + W <= n; i += W) acc0 = S::fmadd(S::load(x + i), S::load(y + i), acc0);
  typename S::T acc = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename S>
void axpy_avx2(typename S::T alpha, const typename S::T* x, typename S::T* y,
               std::size_t n) {
  constexpr std::size_t W = S::kLanes;
  const auto va = S::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) S::store(y + i, S::fmadd(va, S::load(x + i), S::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Row-times-panel: the C row block lives in four registers across the k loop.
template <typename S>
void gemm_nn_avx2(std::size_t m, std::size_t k, std::size_t p,
                  const typename S::T* a, const typename S::T* b,
                  typename S::T* c) {
  using T = typename S::T;
  constexpr std::size_t W = S::kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * p;
    std::size_t j = 0;
    for (; j + 4 * W <= p; j += 4 * W) {
      auto c0 = S::load(crow + j);
      auto c1 = S::load(crow + j + W);
      auto c2 = S::load(crow + j + 2 * W);
      auto c3 = S::load(crow + j + 3 * W);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const auto av = S::set1(arow[kk]);
        const T* brow = b + kk * p + j;
        c0 = S::fmadd(av, S::load(brow), c0);
        c1 = S::fmadd(av, S::load(brow + W), c1);
        c2 = S::fmadd(av, S::load(brow + 2 * W), c2);
        c3 = S::fmadd(av, S::load(brow + 3 * W), c3);
      }
      S::store(crow + j, c0);
      S::store(crow + j + W, c1);
      S::store(crow + j + 2 * W, c2);
      S::store(crow + j + 3 * W, c3);
    }
    for (; j + W <= p; j += W) {
      auto c0 = S::load(crow + j);
      for (std::size_t kk = 0; kk < k; ++kk)
        c0 = S::fmadd(S::set1(arow[kk]), S::load(b + kk * p + j), c0);
      S::store(crow + j, c0);
    }
    for (; j < p; ++j) {
      T acc = crow[j];
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * b[kk * p + j];
      crow[j] = acc;
    }
  }
}

template <typename S>
void gemm_nt_avx2(std::size_t m, std::size_t k, std::size_t p,
                  const typename S::T* a, const typename S::T* b,
                  typename S::T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      c[i * p + j] += dot_avx2<S>(a + i * k, b + j * k, k);
}

template <typename S>
void gemm_tn_avx2(std::size_t m, std::size_t k, std::size_t p,
                  const typename S::T* a, const typename S::T* b,
                  typename S::T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk)
      axpy_avx2<S>(a[i * k + kk], b + i * p, c + kk * p, p);
}

template <typename S>
const KernelTable<typename S::T>& make_table() {
  static const KernelTable<typename S::T> table{
      &dot_avx2<S>, &axpy_avx2<S>, &gemm_nn_avx2<S>, &gemm_nt_avx2<S>,
      &gemm_tn_avx2<S>};
  return table;
}

}  // namespace

template <>
const KernelTable<float>& avx2_table<float>() {
  return make_table<F32>();
}

template <>
const KernelTable<double>& avx2_table<double>() {
  return make_table<F64>();
}

}  // namespace dabs::simd::detail
