// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Amortization cost model and reuse/non-reuse benchmark harness.
//
//   C_nonreuse(M) = M (c_enc + c_ctx + c_read)
//   C_reuse(M)    = (c_enc + c_dora + c_ctx) + M c_read

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dabs/model.hpp"

namespace dabs {

enum class CostUnit : std::uint8_t { kFlops = 0, kSeconds = 1 };

struct CostProfile {
  double c_enc = 0, c_dora = 0, c_ctx = 0, c_read = 0;
  CostUnit unit = CostUnit::kFlops;
  bool scaled = false;  // timings came from batched repetitions

  void validate() const;
  double reuse_cost(std::size_t m) const;
  double nonreuse_cost(std::size_t m) const;
};

struct SpeedupPoint {
  double speedup = 0;
  double flops_reduction = 0;  // 1 - C_reuse / C_nonreuse
};

/// DomainError when M == 0 or the reuse cost is zero.
SpeedupPoint model_speedup(const CostProfile& p, std::size_t m);

// Analytic multiply-add counts (2 flops each) of one sentence of n tokens.
double encoder_flops(const EncoderConfig& cfg, std::size_t n);
double dora_flops(const DoraConfig& cfg, std::size_t d, std::size_t n);
double context_flops(std::size_t d, std::size_t n);
double read_flops(std::size_t d, std::size_t k, std::size_t n);
CostProfile analytic_profile(const ModelConfig& cfg, std::size_t n);

struct ProfileOptions {
  std::size_t warmup = 20;
  std::size_t iterations = 100;
};

/// Median wall-clock seconds of each component over the sample sentences.
template <typename T>
CostProfile measure_profile(const DabsModel<T>& model,
                            const std::vector<std::vector<int>>& sentences,
                            const ProfileOptions& opts = {});

enum class Arrival : std::uint8_t { kDeterministic = 0, kPoisson = 1 };
enum class BenchMode : std::uint8_t { kReuse = 0, kNonReuse = 1 };

/// How the non-reuse path executes. kEncoderPath is the baseline of the cost
/// model (re-encode, reorganize, read; no substrate construction).
/// kFullPass recomputes the whole model per aspect, so predictions are
/// identical to the reuse path.
enum class NonReuseBaseline : std::uint8_t { kEncoderPath = 0, kFullPass = 1 };

struct WorkloadSpec {
  std::vector<double> m_probs{0.5, 0.3, 0.2};  // P(M = 1), P(M = 2), ...
  std::size_t min_len = 8;
  std::size_t max_len = 24;
  double rate = 50.0;       // requests per second
  double duration = 2.0;    // seconds of offered load
  Arrival arrival = Arrival::kPoisson;
  std::uint64_t seed = 0;

  void validate() const;
  static WorkloadSpec fixed_m(std::size_t m, const WorkloadSpec& base);
};

struct Request {
  double arrival = 0;  // seconds
  std::size_t m = 1;
  std::size_t length = 1;
};

/// Deterministic request stream for a workload.
std::vector<Request> make_requests(const WorkloadSpec& w);

struct BenchReport {
  BenchMode mode = BenchMode::kReuse;
  bool simulated = true;
  std::size_t arrivals = 0, completions = 0, in_flight = 0;
  double p50 = 0, p95 = 0, p99 = 0;  // seconds
  double throughput = 0;             // completed requests per second of offered load
  double mean_service = 0;           // seconds
  double median_service = 0;         // robust to the odd scheduler stall
  double total_service = 0;
  double flops = 0;                  // analytic, whole stream
  bool saturated = false;
  std::size_t max_queue = 0;         // queue-growth diagnostic
  std::size_t threads = 1;
};

/// Nearest-rank percentile; 0 for an empty sample.
double percentile(std::vector<double> values, double pct);

/// Single-server FIFO queue over given service times; never blocks.
BenchReport simulate_queue(const std::vector<Request>& requests,
                           const std::vector<double>& service, double duration);

BenchReport simulate_bench(const CostProfile& profile, const WorkloadSpec& w, BenchMode mode);

/// Executes real forward passes for every request (eval mode) and queues
/// them on a virtual clock driven by the measured service times.
template <typename T>
BenchReport run_bench(const DabsModel<T>& model, const WorkloadSpec& w, BenchMode mode,
                      NonReuseBaseline baseline = NonReuseBaseline::kEncoderPath);

/// Labels predicted for one sentence by each path (correctness probe).
template <typename T>
std::vector<std::size_t> bench_predictions(const DabsModel<T>& model,
                                           std::span<const int> tokens,
                                           const std::vector<AspectQuery>& queries,
                                           BenchMode mode, NonReuseBaseline baseline);

struct SweepRow {
  std::size_t m = 0;
  BenchReport reuse, nonreuse;
  double speedup_measured = 0;
  double speedup_model = 0;
  double flops_reduction = 0;
  double throughput_ratio = 0;
};

template <typename T>
std::vector<SweepRow> sweep_m(const DabsModel<T>* model, const CostProfile& profile,
                              const std::vector<std::size_t>& ms, const WorkloadSpec& base,
                              bool simulated);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_bench_json(std::ostream& out, const std::vector<SweepRow>& rows,
                      const CostProfile& profile);

/// Worker count from DABS_THREADS (default 1).
std::size_t configured_threads();

}  // namespace dabs
