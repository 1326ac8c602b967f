// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/costbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

#include <json.hpp>

#include "dabs/error.hpp"
#include "dabs/random.hpp"

namespace dabs {

void CostProfile::validate() const {
  for (double c : {c_enc, c_dora, c_ctx, c_read})
    if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("cost profile entries must be finite and >= 0");
}

double CostProfile::reuse_cost(std::size_t m) const {
  return (c_enc + c_dora + c_ctx) + static_cast<double>(m) * c_read;
}

double CostProfile::nonreuse_cost(std::size_t m) const {
  return static_cast<double>(m) * (c_enc + c_ctx + c_read);
}

SpeedupPoint model_speedup(const CostProfile& p, std::size_t m) {
  p.validate();
  if (m == 0) throw DomainError("model_speedup: M must be >= 1");
  const double reuse = p.reuse_cost(m);
  if (!(reuse > 0.0)) throw DomainError("model_speedup: reuse cost is zero");
  const double nonreuse = p.nonreuse_cost(m);
  return {nonreuse / reuse, nonreuse > 0.0 ? 1.0 - reuse / nonreuse : 0.0};
}

namespace {

double linear(double rows, double in, double out) { return 2.0 * rows * in * out; }

double attention_flops(double d, double n) {
  // Q, K, V, output projections plus the score and value products.
  return 4.0 * linear(n, d, d) + 2.0 * (2.0 * n * n * d);
}

}  // namespace

double encoder_flops(const EncoderConfig& cfg, std::size_t n) {
  const double d = static_cast<double>(cfg.d), nn = static_cast<double>(n);
  const double hidden = d * static_cast<double>(cfg.ffn_mult);
  const double per_layer = attention_flops(d, nn) + linear(nn, d, hidden) + linear(nn, hidden, d);
  return static_cast<double>(cfg.layers) * per_layer;
}

double dora_flops(const DoraConfig& cfg, std::size_t d, std::size_t n) {
  const double dd = static_cast<double>(d), nn = static_cast<double>(n);
  double f = 0.0;
  if (cfg.use_lcp) {
    for (auto k : cfg.kernel_sizes) f += 2.0 * nn * dd * static_cast<double>(k);
    f += linear(nn, static_cast<double>(cfg.kernel_sizes.size()) * dd, dd);
  }
  if (cfg.use_depth_gru && cfg.k > 1)
    f += static_cast<double>(cfg.k - 1) * 6.0 * linear(nn, dd, dd);
  return f;
}

double context_flops(std::size_t d, std::size_t n) {
  return attention_flops(static_cast<double>(d), static_cast<double>(n));
}

double read_flops(std::size_t d, std::size_t k, std::size_t n) {
  const double dd = static_cast<double>(d), nn = static_cast<double>(n), kk = static_cast<double>(k);
  const double token = linear(nn, dd, dd) + linear(1, dd, dd) + linear(nn, dd, 1) + 2.0 * nn * dd;
  const double depth = linear(1, 2 * dd, dd) + linear(1, dd, kk) + 2.0 * kk * dd;
  const double fusion = linear(1, 3 * dd, dd) + linear(1, dd, 3) + 2.0 * 3 * dd;
  return token + depth + fusion + linear(1, dd, 3);
}

CostProfile analytic_profile(const ModelConfig& cfg, std::size_t n) {
  const ModelConfig c = cfg.resolved();
  CostProfile p;
  p.unit = CostUnit::kFlops;
  p.c_enc = encoder_flops(c.encoder, n);
  p.c_dora = dora_flops(c.dora, c.encoder.d, n);
  p.c_ctx = context_flops(c.encoder.d, n);
  p.c_read = read_flops(c.encoder.d, c.dora.k, n);
  return p;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Times fn(i) and returns the per-call median; calls that are too short to
/// time are repeated in batches and the batch time divided.
template <typename F>
double timed_median(std::size_t warmup, std::size_t iterations, F&& fn, bool* scaled) {
  for (std::size_t i = 0; i < warmup; ++i) fn(i);
  std::size_t reps = 1;
  for (;;) {
    const auto t0 = Clock::now();
    for (std::size_t r = 0; r < reps; ++r) fn(r);
    if (seconds_since(t0) >= 1e-6 * static_cast<double>(reps) || reps >= 1024) break;
    reps *= 4;
  }
  if (reps > 1) *scaled = true;
  std::vector<double> samples;
  samples.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = Clock::now();
    for (std::size_t r = 0; r < reps; ++r) fn(i * reps + r);
    samples.push_back(seconds_since(t0) / static_cast<double>(reps));
  }
  return median(std::move(samples));
}

template <typename T>
DepthSubstrate<T> raw_substrate(const HiddenStack<T>& stack, std::size_t k) {
  DepthSubstrate<T> s;
  s.enhanced = stack.states.back();
  for (std::size_t u = stack.layers() - k; u < stack.layers(); ++u) s.levels.push_back(stack.states[u]);
  return s;
}

}  // namespace

template <typename T>
CostProfile measure_profile(const DabsModel<T>& model,
                            const std::vector<std::vector<int>>& sentences,
                            const ProfileOptions& opts) {
  if (sentences.empty()) throw InputError("measure_profile: no sample sentences");
  if (opts.iterations == 0) throw ConfigError("measure_profile: iterations must be >= 1");
  NoGradGuard no_grad;
  ForwardContext ctx;
  const std::size_t s_count = sentences.size();
  std::vector<HiddenStack<T>> stacks;
  std::vector<DepthSubstrate<T>> substrates;
  std::vector<SentenceState<T>> states;
  for (const auto& s : sentences) {
    stacks.push_back(model.encoder().encode(s, ctx));
    states.push_back(model.prepare(s, ctx));
    if (model.has_substrate()) substrates.push_back(model.dora().build_substrate(stacks.back(), ctx));
  }
  CostProfile p;
  p.unit = CostUnit::kSeconds;
  bool scaled = false;
  p.c_enc = timed_median(opts.warmup, opts.iterations, [&](std::size_t i) {
    (void)model.encoder().encode(sentences[i % s_count], ctx);
  }, &scaled);
  if (model.has_substrate()) {
    p.c_dora = timed_median(opts.warmup, opts.iterations, [&](std::size_t i) {
      (void)model.dora().build_substrate(stacks[i % s_count], ctx);
    }, &scaled);
    p.c_ctx = timed_median(opts.warmup, opts.iterations, [&](std::size_t i) {
      (void)model.acbs().prepare(substrates[i % s_count]);
    }, &scaled);
  }
  AspectQuery q;
  p.c_read = timed_median(opts.warmup, opts.iterations, [&](std::size_t i) {
    (void)model.read(states[i % s_count], q, ctx);
  }, &scaled);
  p.scaled = scaled;
  return p;
}

void WorkloadSpec::validate() const {
  if (m_probs.empty()) throw ConfigError("workload: empty aspect-count distribution");
  double total = 0.0;
  for (double p : m_probs) {
    if (p < 0.0) throw ConfigError("workload: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("workload: probabilities must sum to 1");
  if (!(rate > 0.0)) throw ConfigError("workload: rate must be > 0");
  if (!(duration > 0.0)) throw ConfigError("workload: duration must be > 0");
  if (min_len < 1 || min_len > max_len) throw ConfigError("workload: bad length range");
}

WorkloadSpec WorkloadSpec::fixed_m(std::size_t m, const WorkloadSpec& base) {
  if (m == 0) throw ConfigError("workload: M must be >= 1");
  WorkloadSpec w = base;
  w.m_probs.assign(m, 0.0);
  w.m_probs[m - 1] = 1.0;
  return w;
}

std::vector<Request> make_requests(const WorkloadSpec& w) {
  w.validate();
  Rng rng(w.seed);
  std::vector<Request> out;
  double t = 0.0;
  for (;;) {
    if (w.arrival == Arrival::kPoisson) t += -std::log(1.0 - uniform01(rng)) / w.rate;
    if (t >= w.duration) break;
    Request r;
    r.arrival = t;
    r.m = draw_index(rng, w.m_probs) + 1;
    r.length = w.min_len + below(rng, w.max_len - w.min_len + 1);
    r.length = std::max(r.length, r.m);
    out.push_back(r);
    if (w.arrival == Arrival::kDeterministic) t = static_cast<double>(out.size()) / w.rate;
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

BenchReport simulate_queue(const std::vector<Request>& requests, const std::vector<double>& service,
                           double duration) {
  if (requests.size() != service.size()) throw InputError("simulate_queue: size mismatch");
  BenchReport r;
  r.arrivals = requests.size();
  std::vector<double> latency, starts;
  latency.reserve(requests.size());
  double free_at = 0.0, last_finish = 0.0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const double start = std::max(requests[i].arrival, free_at);
    const double finish = start + service[i];
    // Requests still waiting when this one arrives.
    const std::size_t waiting = static_cast<std::size_t>(
        std::count_if(starts.begin(), starts.end(), [&](double s) { return s > requests[i].arrival; }));
    r.max_queue = std::max(r.max_queue, waiting);
    starts.push_back(start);
    free_at = finish;
    last_finish = finish;
    latency.push_back(finish - requests[i].arrival);
    if (finish <= duration) ++r.completions;
    r.total_service += service[i];
  }
  r.in_flight = r.arrivals - r.completions;
  r.p50 = percentile(latency, 50);
  r.p95 = percentile(latency, 95);
  r.p99 = percentile(latency, 99);
  r.mean_service = r.arrivals ? r.total_service / static_cast<double>(r.arrivals) : 0.0;
  r.median_service = percentile(service, 50);
  const double makespan = std::max(duration, last_finish);
  r.throughput = makespan > 0.0 ? static_cast<double>(r.arrivals) / makespan : 0.0;
  r.saturated = r.total_service >= duration;
  return r;
}

BenchReport simulate_bench(const CostProfile& profile, const WorkloadSpec& w, BenchMode mode) {
  profile.validate();
  const auto requests = make_requests(w);
  std::vector<double> service;
  service.reserve(requests.size());
  for (const auto& q : requests)
    service.push_back(mode == BenchMode::kReuse ? profile.reuse_cost(q.m) : profile.nonreuse_cost(q.m));
  BenchReport r = simulate_queue(requests, service, w.duration);
  r.mode = mode;
  r.simulated = true;
  r.threads = configured_threads();
  return r;
}

namespace {

struct SyntheticRequest {
  std::vector<int> tokens;
  std::vector<AspectQuery> queries;
};

SyntheticRequest synthesize(const Request& q, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticRequest s;
  for (std::size_t t = 0; t < q.length; ++t)
    s.tokens.push_back(static_cast<int>(2 + below(rng, std::max<std::size_t>(vocab, 3) - 2)));
  for (std::size_t i = 0; i < q.m; ++i) {
    AspectQuery a;
    a.first = 1 + below(rng, q.length);
    a.last = std::min(q.length, a.first + below(rng, 2));
    s.queries.push_back(a);
  }
  return s;
}

template <typename T>
std::vector<std::size_t> execute(const DabsModel<T>& model, std::span<const int> tokens,
                                 const std::vector<AspectQuery>& queries, BenchMode mode,
                                 NonReuseBaseline baseline) {
  ForwardContext ctx;
  std::vector<std::size_t> labels;
  if (mode == BenchMode::kReuse || baseline == NonReuseBaseline::kFullPass) {
    for (const auto& r : model.forward(tokens, queries, ctx, mode == BenchMode::kReuse))
      labels.push_back(r.prediction());
    return labels;
  }
  for (const auto& q : queries) {
    if (!model.has_substrate()) {
      labels.push_back(model.read(model.prepare(tokens, ctx), q, ctx).prediction());
      continue;
    }
    const auto stack = model.encoder().encode(tokens, ctx);
    const auto view = model.acbs().prepare(raw_substrate(stack, model.depth()));
    labels.push_back(model.acbs().read_aspect(view, q, ctx).prediction());
  }
  return labels;
}

}  // namespace

template <typename T>
std::vector<std::size_t> bench_predictions(const DabsModel<T>& model, std::span<const int> tokens,
                                           const std::vector<AspectQuery>& queries, BenchMode mode,
                                           NonReuseBaseline baseline) {
  NoGradGuard no_grad;
  return execute(model, tokens, queries, mode, baseline);
}

template <typename T>
BenchReport run_bench(const DabsModel<T>& model, const WorkloadSpec& w, BenchMode mode,
                      NonReuseBaseline baseline) {
  NoGradGuard no_grad;
  const auto requests = make_requests(w);
  const ModelConfig& cfg = model.config();
  std::vector<double> service;
  service.reserve(requests.size());
  double flops = 0.0;
  // Two warmup requests so first-touch allocation does not land in the tail.
  for (std::size_t i = 0; i < std::min<std::size_t>(2, requests.size()); ++i) {
    const auto s = synthesize(requests[i], cfg.encoder.vocab_size, derive_seed(w.seed, i));
    (void)execute(model, s.tokens, s.queries, mode, baseline);
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto s = synthesize(requests[i], cfg.encoder.vocab_size, derive_seed(w.seed, i));
    const auto t0 = Clock::now();
    (void)execute(model, s.tokens, s.queries, mode, baseline);
    service.push_back(seconds_since(t0));
    const CostProfile p = analytic_profile(cfg, requests[i].length);
    flops += mode == BenchMode::kReuse ? p.reuse_cost(requests[i].m) : p.nonreuse_cost(requests[i].m);
  }
  BenchReport r = simulate_queue(requests, service, w.duration);
  r.mode = mode;
  r.simulated = false;
  r.flops = flops;
  r.threads = configured_threads();
  return r;
}

template <typename T>
std::vector<SweepRow> sweep_m(const DabsModel<T>* model, const CostProfile& profile,
                              const std::vector<std::size_t>& ms, const WorkloadSpec& base,
                              bool simulated) {
  if (ms.empty()) throw ConfigError("sweep: empty M range");
  if (!simulated && !model) throw ConfigError("sweep: real mode needs a model");
  std::vector<SweepRow> rows;
  for (auto m : ms) {
    const WorkloadSpec w = WorkloadSpec::fixed_m(m, base);
    SweepRow row;
    row.m = m;
    if (simulated) {
      row.reuse = simulate_bench(profile, w, BenchMode::kReuse);
      row.nonreuse = simulate_bench(profile, w, BenchMode::kNonReuse);
    } else {
      row.reuse = run_bench(*model, w, BenchMode::kReuse);
      row.nonreuse = run_bench(*model, w, BenchMode::kNonReuse);
    }
    const SpeedupPoint sp = model_speedup(profile, m);
    row.speedup_model = sp.speedup;
    row.flops_reduction = sp.flops_reduction;
    row.speedup_measured = row.reuse.mean_service > 0.0 ? row.nonreuse.mean_service / row.reuse.mean_service : 0.0;
    row.throughput_ratio = row.nonreuse.throughput > 0.0 ? row.reuse.throughput / row.nonreuse.throughput : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "M,p50_reuse,p50_nonreuse,p95_reuse,p95_nonreuse,speedup_measured,speedup_model,"
         "flops_reduction,throughput_ratio\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f,%.6f\n", r.m, r.reuse.p50,
                  r.nonreuse.p50, r.reuse.p95, r.nonreuse.p95, r.speedup_measured, r.speedup_model,
                  r.flops_reduction, r.throughput_ratio);
    out << buf;
  }
}

void write_bench_json(std::ostream& out, const std::vector<SweepRow>& rows, const CostProfile& profile) {
  using nlohmann::json;
  auto report = [](const BenchReport& b) {
    return json{{"simulated", b.simulated},     {"arrivals", b.arrivals},
                {"completions", b.completions}, {"in_flight", b.in_flight},
                {"p50", b.p50},                 {"p95", b.p95},
                {"p99", b.p99},                 {"throughput", b.throughput},
                {"mean_service", b.mean_service}, {"median_service", b.median_service}, {"flops", b.flops},
                {"saturated", b.saturated},     {"max_queue", b.max_queue},
                {"threads", b.threads}};
  };
  json j;
  j["profile"] = {{"c_enc", profile.c_enc},   {"c_dora", profile.c_dora}, {"c_ctx", profile.c_ctx},
                  {"c_read", profile.c_read}, {"unit", profile.unit == CostUnit::kFlops ? "flops" : "seconds"},
                  {"scaled", profile.scaled}};
  j["rows"] = json::array();
  for (const auto& r : rows) {
    const double agreement = r.speedup_model > 0.0 ? r.speedup_measured / r.speedup_model : 0.0;
    j["rows"].push_back({{"M", r.m},
                         {"reuse", report(r.reuse)},
                         {"nonreuse", report(r.nonreuse)},
                         {"speedup_measured", r.speedup_measured},
                         {"speedup_model", r.speedup_model},
                         {"flops_reduction", r.flops_reduction},
                         {"throughput_ratio", r.throughput_ratio},
                         {"agreement", agreement}});
  }
  out << j.dump(2) << '\n';
}

std::size_t configured_threads() {
  const char* v = std::getenv("DABS_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("DABS_THREADS must be a positive integer, got ") + v);
  return static_cast<std::size_t>(n);
}

#define DABS_INSTANTIATE_COSTBENCH(T)                                                                  \
  template CostProfile measure_profile(const DabsModel<T>&, const std::vector<std::vector<int>>&,     \
                                       const ProfileOptions&);                                        \
  template BenchReport run_bench(const DabsModel<T>&, const WorkloadSpec&, BenchMode, NonReuseBaseline); \
  template std::vector<std::size_t> bench_predictions(const DabsModel<T>&, std::span<const int>,     \
                                                      const std::vector<AspectQuery>&, BenchMode,     \
                                                      NonReuseBaseline);                              \
  template std::vector<SweepRow> sweep_m(const DabsModel<T>*, const CostProfile&,                    \
                                         const std::vector<std::size_t>&, const WorkloadSpec&, bool);

DABS_INSTANTIATE_COSTBENCH(float)
DABS_INSTANTIATE_COSTBENCH(double)

}  // namespace dabs
