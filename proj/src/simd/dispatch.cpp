// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "dabs/error.hpp"
#include "dabs/simd.hpp"

namespace dabs::simd {
namespace {

Isa initial_isa() {
  Isa isa = detected_isa();
  if (const char* env = std::getenv("DABS_SIMD")) {
    const std::string want(env);
    if (want == "scalar") isa = Isa::kScalar;
    else if (want == "avx2" && isa_supported(Isa::kAvx2)) isa = Isa::kAvx2;
  }
  return isa;
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(DABS_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() {
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa))
    throw DomainError("instruction set not supported on this host: " +
                      std::string(isa_name(isa)));
  active_slot().store(isa, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& kernels(Isa isa) {
  if (!isa_supported(isa))
    throw DomainError("instruction set not supported on this host: " +
                      std::string(isa_name(isa)));
#if defined(DABS_HAVE_AVX2)
  if (isa == Isa::kAvx2) return detail::avx2_table<T>();
#endif
  return detail::scalar_table<T>();
}

template const KernelTable<float>& kernels<float>(Isa);
template const KernelTable<double>& kernels<double>(Isa);

}  // namespace dabs::simd
