// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point. Every subcommand writes machine-readable output
// into --out together with the resolved configuration it ran with.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dabs/config.hpp"
#include "dabs/controls.hpp"
#include "dabs/corpus.hpp"
#include "dabs/costbench.hpp"
#include "dabs/error.hpp"
#include "dabs/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dabs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kSpec:
      return kExitUsage;
    case ErrorKind::kInput:
    case ErrorKind::kFormat:
      return kExitInput;
    default:
      return kExitRuntime;
  }
}

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kSpec: return "spec";
  }
  return "error";
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

struct Options {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;

  std::string data;
  std::string test_data;
  std::string model_dir;
  std::string split = "test";
  std::string architecture;
  std::vector<std::string> ablate;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> k_values;
  std::vector<std::size_t> m_values;
  std::size_t epochs = 0;
  std::size_t n_sentences = 0;
  bool architectures = false;
  bool layer_order = false;
  bool depth = false;
  bool simulated = false;
};

RunConfig resolve(const Options& o) {
  RunConfig c;
  if (!o.config_path.empty()) c = load_run_config(o.config_path);
  if (o.seed_set) c.seed = o.seed;
  if (!o.out.empty()) c.out = o.out;
  if (!o.architecture.empty()) c.model.architecture = parse_architecture(o.architecture);
  if (o.epochs) c.train.epochs = o.epochs;
  if (o.n_sentences) c.generate.n_sentences = o.n_sentences;
  if (!o.k_values.empty()) c.probes.k_values = o.k_values;
  if (!o.m_values.empty()) c.bench.m_values = o.m_values;
  if (o.simulated) c.bench.simulated = true;
  c.generate.seed = c.seed;
  c.train.seed = c.seed;
  c.workload.seed = c.seed;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void write_resolved(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.out);
  json j = run_to_json(c);
  j["command"] = command;
  write_text(fs::path(c.out) / "resolved_config.json", j.dump(2) + "\n");
}

Corpus load_corpus(const std::string& path) {
  if (path.empty()) throw ConfigError("--data is required");
  std::vector<IngestWarning> warnings;
  Corpus c = ingest_jsonl_file(path, &warnings);
  for (const auto& w : warnings)
    std::cerr << json{{"warning", w.message}, {"line", w.line}}.dump() << '\n';
  return c;
}

json report_json(const EvalReport& r) {
  json j;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const std::string name(label_name(static_cast<Label>(c)));
    j["per_class"][name] = {{"precision", r.precision[c]}, {"recall", r.recall[c]}, {"f1", r.f1[c]}};
  }
  j["confusion"] = r.confusion;
  j["loss"] = r.loss;
  return j;
}

std::vector<std::uint64_t> seeds_or_default(const Options& o, const RunConfig& c) {
  return o.seeds.empty() ? std::vector<std::uint64_t>{c.seed} : o.seeds;
}

/// Test part of the split recorded next to a trained model, or everything.
Corpus evaluation_corpus(const Options& o, const LoadedModel& m, const Corpus& all) {
  Corpus part = all;
  if (o.split == "test") {
    std::ifstream in(fs::path(o.model_dir) / "resolved_config.json");
    RunConfig trained;
    if (in) {
      json j;
      in >> j;
      j.erase("command");
      run_from_json(j, trained);
    }
    part = split_corpus(all, trained.data.test_fraction, trained.data.split_seed).second;
  } else if (o.split != "all") {
    throw ConfigError("--split must be test or all");
  }
  m.vocab.attach(part);
  return part;
}

int cmd_generate(const Options& o) {
  RunConfig c = resolve(o);
  write_resolved(c, "generate");
  const Corpus corpus = generate(c.generate);
  export_jsonl_file((fs::path(c.out) / "corpus.jsonl").string(), corpus);
  json manifest{{"generator", gen_to_json(c.generate)}, {"seed", c.generate.seed},
                {"sentences", corpus.size()}};
  write_text(fs::path(c.out) / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

int cmd_stats(const Options& o) {
  RunConfig c = resolve(o);
  write_resolved(c, "stats");
  const CorpusStats s = stats(load_corpus(o.data));
  json j{{"sentences", s.n_sentences}, {"aspects", s.n_aspects}, {"avg_m", s.avg_m},
         {"p_m1", s.p_m1}, {"p_m2", s.p_m2}, {"p_m_gt2", s.p_m_gt2}, {"p_m_gt1", s.p_m_gt1},
         {"class_counts", {{"positive", s.class_counts[0]}, {"neutral", s.class_counts[1]},
                           {"negative", s.class_counts[2]}}}};
  write_text(fs::path(c.out) / "stats.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o) {
  RunConfig c = resolve(o);
  LossWeights& loss = c.train.loss;
  for (const auto& a : o.ablate) apply_ablation(parse_ablation(a), c.model, loss);
  write_resolved(c, "train");
  const Corpus corpus = load_corpus(o.data);
  Dataset data;
  if (!o.test_data.empty()) {
    data.train = corpus;
    data.test = load_corpus(o.test_data);
    data.vocab = Vocab::build(data.train);
    data.vocab.attach(data.train);
    data.vocab.attach(data.test);
  } else {
    data = make_dataset(corpus, c.data.test_fraction, c.data.split_seed);
  }
  std::ofstream metrics(fs::path(c.out) / "metrics.csv");
  TrainedModel t = train_variant(data, c.model, c.train, c.seed, &metrics);
  save_model_dir(c.out, *t.model, data.vocab);
  json summary{{"best_epoch", t.result.best_epoch},
               {"protocol", "best test-set epoch within the training budget (no dev split)"},
               {"best", report_json(t.result.best)}};
  write_text(fs::path(c.out) / "train_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o) {
  RunConfig c = resolve(o);
  if (o.model_dir.empty()) throw ConfigError("--model is required");
  write_resolved(c, "eval");
  const LoadedModel m = load_model_dir(o.model_dir);
  const Corpus part = evaluation_corpus(o, m, load_corpus(o.data));
  const json j = report_json(evaluate_model(*m.model, part));
  write_text(fs::path(c.out) / "eval.json", j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  return kExitOk;
}

int cmd_trace(const Options& o) {
  RunConfig c = resolve(o);
  if (o.model_dir.empty()) throw ConfigError("--model is required");
  write_resolved(c, "trace");
  const LoadedModel m = load_model_dir(o.model_dir);
  const Corpus part = evaluation_corpus(o, m, load_corpus(o.data));
  const Predictions p = predict(*m.model, part, nullptr, true);
  std::ofstream out(fs::path(c.out) / "traces.jsonl");
  for (const auto& t : p.traces) write_trace_jsonl(out, t);
  return kExitOk;
}

SeedRow run_seeds(const Dataset& data, const std::string& label, const ModelConfig& model,
                  const TrainConfig& train, const std::vector<std::uint64_t>& seeds) {
  SeedRow row;
  row.config = label;
  for (auto s : seeds) {
    const TrainedModel t = train_variant(data, model, train, s);
    row.seeds.push_back(s);
    row.mf1.push_back(t.result.best.macro_f1);
    row.acc.push_back(t.result.best.accuracy);
    std::cerr << json{{"config", label}, {"seed", s}, {"mf1", t.result.best.macro_f1}}.dump() << '\n';
  }
  return row;
}

int cmd_probe(const Options& o) {
  RunConfig c = resolve(o);
  write_resolved(c, "probe");
  const fs::path out(c.out);
  const auto seeds = seeds_or_default(o, c);
  const bool training_probe = !o.ablate.empty() || o.architectures || o.layer_order || !c.probes.k_values.empty();
  Dataset data;
  if (training_probe) data = make_dataset(load_corpus(o.data), c.data.test_fraction, c.data.split_seed);

  if (!o.ablate.empty()) {
    const SeedRow full = run_seeds(data, std::string(ablation_label(Ablation::kNone)), c.model, c.train, seeds);
    std::vector<SeedRow> rows{full};
    for (const auto& name : o.ablate) {
      const Ablation a = parse_ablation(name);
      ModelConfig m = c.model;
      TrainConfig t = c.train;
      apply_ablation(a, m, t.loss);
      rows.push_back(run_seeds(data, std::string(ablation_label(a)), m, t, seeds));
    }
    std::ofstream f(out / "ablations.csv");
    write_comparison_csv(f, full, compare_to(full, rows));
  }
  if (o.architectures) {
    std::vector<SeedRow> rows;
    for (auto a : {Architecture::kEncoderOnly, Architecture::kDoraOnly, Architecture::kAcbsOnly,
                   Architecture::kFull}) {
      ModelConfig m = c.model;
      m.architecture = a;
      rows.push_back(run_seeds(data, std::string(architecture_name(a)), m, c.train, seeds));
    }
    std::ofstream f(out / "architectures.csv");
    write_comparison_csv(f, rows.front(), compare_to(rows.front(), rows));
  }
  if (o.layer_order) {
    const auto runs = layer_order_protocol(c.model, c.train, seeds, c.model.dora.shuffle_seed);
    if (!protocol_parity(runs)) throw TrainingError("layer-order runs differ in more than the order");
    StressParams sp{c.probes.stress_percentile, c.probes.negation_min_length};
    const Corpus negation = build_stress_splits(data.test, sp).negation;
    std::ofstream f(out / "layer_order.csv");
    f << "order,seed,test_mf1,negation_mf1,negation_n\n";
    for (const auto& r : runs) {
      const TrainedModel t = train_variant(data, r.model, r.train, r.seed);
      const EvalReport neg = evaluate_model(*t.model, negation);
      char buf[160];
      std::snprintf(buf, sizeof buf, ",%llu,%.6f,%.6f,%zu\n", static_cast<unsigned long long>(r.seed),
                    t.result.best.macro_f1, neg.macro_f1, neg.n);
      f << layer_order_name(r.order) << buf;
    }
  }
  if (!c.probes.k_values.empty()) {
    std::vector<SeedRow> rows;
    for (auto k : c.probes.k_values) {
      ModelConfig m = c.model;
      m.dora.k = k;
      rows.push_back(run_seeds(data, "K=" + std::to_string(k), m, c.train, seeds));
    }
    std::ofstream f(out / "k_sweep.csv");
    write_comparison_csv(f, rows.back(), compare_to(rows.back(), rows));
  }
  if (!o.model_dir.empty()) {
    const LoadedModel m = load_model_dir(o.model_dir);
    const Corpus part = evaluation_corpus(o, m, load_corpus(o.data));
    const RegionBands bands = RegionBands::for_depth(m.model->depth());
    const RegionReport region = region_sweep(*m.model, part, bands);
    std::ofstream rf(out / "region_sweep.csv");
    write_region_csv(rf, {region});
    DepthControlRow row;
    row.config = "DABS";
    row.base_mf1 = region.base_mf1;
    row.rand2l = rand2l_trials(*m.model, part, c.probes.rand2l_trials, c.probes.rand2l_seed);
    row.single = single_layer_controls(*m.model, part);
    std::ofstream df(out / "depth_controls.csv");
    write_depth_control_csv(df, {row});
    const Predictions p = predict(*m.model, part, nullptr, true);
    const NegationShift shift = negation_shift(p.traces, part, bands);
    json nj;
    for (std::size_t b = 0; b < 3; ++b)
      nj["regions"][std::string(kRegionNames[b])] = {{"negated_pp", shift.negated_pp[b]},
                                                    {"plain_pp", shift.plain_pp[b]},
                                                    {"delta_pp", shift.delta_pp[b]}};
    nj["n_negated"] = shift.n_negated;
    nj["n_plain"] = shift.n_plain;
    nj["insufficient_data"] = shift.insufficient;
    write_text(out / "negation_shift.json", nj.dump(2) + "\n");
    StressParams sp{c.probes.stress_percentile, c.probes.negation_min_length};
    const StressSplits splits = build_stress_splits(part, sp);
    json sj{{"length_threshold", splits.length_threshold}};
    auto add = [&](const char* name, const Corpus& split) {
      sj[name]["sentences"] = split.size();
      if (!split.empty()) sj[name]["report"] = report_json(evaluate_model(*m.model, split));
    };
    add("long", splits.long_sentences);
    add("conflict", splits.conflict);
    add("negation", splits.negation);
    write_text(out / "stress_splits.json", sj.dump(2) + "\n");
  }
  if (!training_probe && o.model_dir.empty())
    throw ConfigError("probe needs --model and/or one of --ablate, --architectures, --layer-order, --k-values");
  return kExitOk;
}

int cmd_bench(const Options& o) {
  RunConfig c = resolve(o);
  write_resolved(c, "bench");
  std::unique_ptr<DabsModel<float>> owned;
  const DabsModel<float>* model = nullptr;
  if (!o.model_dir.empty()) {
    owned = std::move(load_model_dir(o.model_dir).model);
  } else {
    owned = std::make_unique<DabsModel<float>>(c.model, c.seed);
  }
  model = owned.get();
  CostProfile profile;
  if (c.bench.simulated) {
    profile = analytic_profile(model->config(), c.bench.profile_length);
    // Simulated service times in seconds at a nominal 1 GFLOP/s.
    for (double* v : {&profile.c_enc, &profile.c_dora, &profile.c_ctx, &profile.c_read}) *v *= 1e-9;
    profile.unit = CostUnit::kSeconds;
  } else {
    Rng rng(c.seed);
    std::vector<std::vector<int>> sample;
    for (int i = 0; i < 8; ++i) {
      std::vector<int> s;
      for (std::size_t t = 0; t < c.bench.profile_length; ++t)
        s.push_back(static_cast<int>(2 + below(rng, std::max<std::size_t>(model->config().encoder.vocab_size, 3) - 2)));
      sample.push_back(std::move(s));
    }
    profile = measure_profile(*model, sample, {c.bench.warmup, c.bench.iterations});
  }
  WorkloadSpec base = c.workload;
  base.min_len = base.max_len = c.bench.profile_length;
  const auto rows = sweep_m(model, profile, c.bench.m_values, base, c.bench.simulated);
  std::ofstream csv(fs::path(c.out) / "bench.csv");
  write_sweep_csv(csv, rows);
  std::ofstream js(fs::path(c.out) / "bench.json");
  write_bench_json(js, rows, profile);
  write_sweep_csv(std::cout, rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DABS: depth-aware aspect sentiment readout over a reusable substrate"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; o.seed_set = true; },
                                         "global seed");
  app.add_option("--threads", o.threads, "worker threads (exported as DABS_THREADS)");

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  gen->add_option("--n", o.n_sentences, "number of sentences");
  auto* st = app.add_subcommand("stats", "aspect multiplicity and class statistics");
  st->add_option("--data", o.data, "corpus JSONL")->required();
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  tr->add_option("--data", o.data, "corpus JSONL")->required();
  tr->add_option("--test", o.test_data, "separate test JSONL (otherwise a split of --data)");
  tr->add_option("--arch", o.architecture, "full | encoder_only | dora_only | acbs_only");
  tr->add_option("--ablate", o.ablate, "component to remove, e.g. token_sel");
  tr->add_option("--epochs", o.epochs, "training epochs");
  auto* ev = app.add_subcommand("eval", "evaluate a trained model");
  ev->add_option("--model", o.model_dir, "model directory")->required();
  ev->add_option("--data", o.data, "corpus JSONL")->required();
  ev->add_option("--split", o.split, "test (the split used in training) or all");
  auto* pr = app.add_subcommand("probe", "depth controls, ablations and protocol sweeps");
  pr->add_option("--model", o.model_dir, "model directory for depth-control probes");
  pr->add_option("--data", o.data, "corpus JSONL")->required();
  pr->add_option("--split", o.split, "test or all (depth-control probes)");
  pr->add_option("--ablate", o.ablate, "components to remove (one run per name)");
  pr->add_flag("--architectures", o.architectures, "encoder-only / DORA-only / ACBS-only / full");
  pr->add_flag("--layer-order", o.layer_order, "normal / reversed / shuffled depth order");
  pr->add_option("--k-values", o.k_values, "depth budgets to sweep");
  pr->add_option("--seeds", o.seeds, "training seeds");
  pr->add_option("--epochs", o.epochs, "training epochs");
  auto* be = app.add_subcommand("bench", "reuse versus non-reuse latency and cost");
  be->add_option("--model", o.model_dir, "model directory (default: fresh model from config)");
  be->add_option("--m", o.m_values, "aspect counts to sweep");
  be->add_flag("--simulated", o.simulated, "queue simulation from the analytic cost profile");
  auto* tc = app.add_subcommand("trace", "export selection traces as JSON lines");
  tc->add_option("--model", o.model_dir, "model directory")->required();
  tc->add_option("--data", o.data, "corpus JSONL")->required();
  tc->add_option("--split", o.split, "test or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    return report_error("usage", e.what(), kExitUsage);
  }

  try {
    if (o.threads) setenv("DABS_THREADS", std::to_string(o.threads).c_str(), 1);
    (void)configured_threads();
    if (gen->parsed()) return cmd_generate(o);
    if (st->parsed()) return cmd_stats(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (pr->parsed()) return cmd_probe(o);
    if (be->parsed()) return cmd_bench(o);
    if (tc->parsed()) return cmd_trace(o);
  } catch (const Error& e) {
    return report_error(kind_name(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), kExitRuntime);
  }
  return kExitUsage;
}
