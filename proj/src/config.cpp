// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/config.hpp"

#include <fstream>
#include <set>

#include "dabs/error.hpp"

namespace dabs {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section " + section + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key " + section + "." + key);
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + section + "." + key + " has the wrong type");
  }
}

json encoder_json(const EncoderConfig& e) {
  return {{"vocab_size", e.vocab_size}, {"d", e.d}, {"layers", e.layers}, {"heads", e.heads},
          {"ffn_mult", e.ffn_mult}, {"max_len", e.max_len}, {"dropout", e.dropout}};
}

json dora_json(const DoraConfig& d) {
  return {{"k", d.k}, {"kernel_sizes", d.kernel_sizes}, {"beta_init", d.beta_init},
          {"layer_order", std::string(layer_order_name(d.layer_order))},
          {"shuffle_seed", d.shuffle_seed}, {"use_depth_gru", d.use_depth_gru},
          {"use_lcp", d.use_lcp}, {"dropout", d.dropout}};
}

json acbs_json(const AcbsConfig& a) {
  return {{"tau_alpha", a.tau_alpha}, {"tau_g", a.tau_g}, {"eps", a.eps}, {"heads", a.heads},
          {"use_token_sel", a.use_token_sel}, {"use_layer_sel", a.use_layer_sel},
          {"use_gated_fusion", a.use_gated_fusion}, {"dropout", a.dropout},
          {"classifier_dropout", a.classifier_dropout}};
}

json loss_json(const LossWeights& l) {
  return {{"lambda_s", l.lambda_s}, {"lambda_m", l.lambda_m}, {"lambda_ent", l.lambda_ent},
          {"mask_l1", l.mask_l1}};
}

void encoder_from(const json& j, EncoderConfig& e) {
  const std::string s = "encoder";
  check_keys(j, s, {"vocab_size", "d", "layers", "heads", "ffn_mult", "max_len", "dropout"});
  read(j, "vocab_size", e.vocab_size, s);
  read(j, "d", e.d, s);
  read(j, "layers", e.layers, s);
  read(j, "heads", e.heads, s);
  read(j, "ffn_mult", e.ffn_mult, s);
  read(j, "max_len", e.max_len, s);
  read(j, "dropout", e.dropout, s);
}

void dora_from(const json& j, DoraConfig& d) {
  const std::string s = "dora";
  check_keys(j, s, {"k", "kernel_sizes", "beta_init", "layer_order", "shuffle_seed", "use_depth_gru",
                    "use_lcp", "dropout"});
  read(j, "k", d.k, s);
  read(j, "kernel_sizes", d.kernel_sizes, s);
  read(j, "beta_init", d.beta_init, s);
  std::string order(layer_order_name(d.layer_order));
  read(j, "layer_order", order, s);
  d.layer_order = parse_layer_order(order);
  read(j, "shuffle_seed", d.shuffle_seed, s);
  read(j, "use_depth_gru", d.use_depth_gru, s);
  read(j, "use_lcp", d.use_lcp, s);
  read(j, "dropout", d.dropout, s);
}

void acbs_from(const json& j, AcbsConfig& a) {
  const std::string s = "acbs";
  check_keys(j, s, {"tau_alpha", "tau_g", "eps", "heads", "use_token_sel", "use_layer_sel",
                    "use_gated_fusion", "dropout", "classifier_dropout"});
  read(j, "tau_alpha", a.tau_alpha, s);
  read(j, "tau_g", a.tau_g, s);
  read(j, "eps", a.eps, s);
  read(j, "heads", a.heads, s);
  read(j, "use_token_sel", a.use_token_sel, s);
  read(j, "use_layer_sel", a.use_layer_sel, s);
  read(j, "use_gated_fusion", a.use_gated_fusion, s);
  read(j, "dropout", a.dropout, s);
  read(j, "classifier_dropout", a.classifier_dropout, s);
}

void loss_from(const json& j, LossWeights& l) {
  const std::string s = "loss";
  check_keys(j, s, {"lambda_s", "lambda_m", "lambda_ent", "mask_l1"});
  read(j, "lambda_s", l.lambda_s, s);
  read(j, "lambda_m", l.lambda_m, s);
  read(j, "lambda_ent", l.lambda_ent, s);
  read(j, "mask_l1", l.mask_l1, s);
}

json workload_json(const WorkloadSpec& w) {
  return {{"m_probs", w.m_probs}, {"min_len", w.min_len}, {"max_len", w.max_len},
          {"rate", w.rate}, {"duration", w.duration},
          {"arrival", w.arrival == Arrival::kPoisson ? "poisson" : "deterministic"},
          {"seed", w.seed}};
}

void workload_from(const json& j, WorkloadSpec& w) {
  const std::string s = "workload";
  check_keys(j, s, {"m_probs", "min_len", "max_len", "rate", "duration", "arrival", "seed"});
  read(j, "m_probs", w.m_probs, s);
  read(j, "min_len", w.min_len, s);
  read(j, "max_len", w.max_len, s);
  read(j, "rate", w.rate, s);
  read(j, "duration", w.duration, s);
  std::string arrival = w.arrival == Arrival::kPoisson ? "poisson" : "deterministic";
  read(j, "arrival", arrival, s);
  if (arrival == "poisson") w.arrival = Arrival::kPoisson;
  else if (arrival == "deterministic") w.arrival = Arrival::kDeterministic;
  else throw ConfigError("workload.arrival must be poisson or deterministic");
  read(j, "seed", w.seed, s);
}

}  // namespace

json model_to_json(const ModelConfig& c) {
  return {{"architecture", std::string(architecture_name(c.architecture))},
          {"encoder", encoder_json(c.encoder)},
          {"dora", dora_json(c.dora)},
          {"acbs", acbs_json(c.acbs)}};
}

void model_from_json(const json& j, ModelConfig& c) {
  check_keys(j, "model", {"architecture", "encoder", "dora", "acbs"});
  std::string arch(architecture_name(c.architecture));
  read(j, "architecture", arch, "model");
  c.architecture = parse_architecture(arch);
  if (j.contains("encoder")) encoder_from(j.at("encoder"), c.encoder);
  if (j.contains("dora")) dora_from(j.at("dora"), c.dora);
  if (j.contains("acbs")) acbs_from(j.at("acbs"), c.acbs);
}

json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.optim.lr},
          {"weight_decay", c.optim.weight_decay}, {"beta1", c.optim.beta1},
          {"beta2", c.optim.beta2}, {"adam_eps", c.optim.eps}, {"clip", c.clip},
          {"seed", c.seed}, {"loss", loss_json(c.loss)}};
}

void train_from_json(const json& j, TrainConfig& c) {
  const std::string s = "train";
  check_keys(j, s, {"epochs", "batch_size", "lr", "weight_decay", "beta1", "beta2", "adam_eps",
                    "clip", "seed", "loss"});
  read(j, "epochs", c.epochs, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "lr", c.optim.lr, s);
  read(j, "weight_decay", c.optim.weight_decay, s);
  read(j, "beta1", c.optim.beta1, s);
  read(j, "beta2", c.optim.beta2, s);
  read(j, "adam_eps", c.optim.eps, s);
  read(j, "clip", c.clip, s);
  read(j, "seed", c.seed, s);
  if (j.contains("loss")) loss_from(j.at("loss"), c.loss);
}

json gen_to_json(const GenSpec& g) {
  return {{"n_sentences", g.n_sentences},
          {"m_probs", g.m_probs},
          {"mix", {{"plain", g.mix[0]}, {"negation", g.mix[1]}, {"contrast", g.mix[2]}, {"conflict", g.mix[3]}}},
          {"label_weights", {{"positive", g.label_weights[0]}, {"neutral", g.label_weights[1]}, {"negative", g.label_weights[2]}}},
          {"filler_prob", g.filler_prob},
          {"seed", g.seed},
          {"lexicons", {{"aspects", g.lexicons.aspects}, {"positive", g.lexicons.positive},
                        {"negative", g.lexicons.negative}, {"neutral", g.lexicons.neutral},
                        {"negators", g.lexicons.negators}}}};
}

namespace {

void gen_from(const json& j, GenSpec& g) {
  const std::string s = "generate";
  check_keys(j, s, {"n_sentences", "m_probs", "mix", "label_weights", "filler_prob", "seed", "lexicons"});
  read(j, "n_sentences", g.n_sentences, s);
  read(j, "m_probs", g.m_probs, s);
  read(j, "filler_prob", g.filler_prob, s);
  read(j, "seed", g.seed, s);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    check_keys(m, "generate.mix", {"plain", "negation", "contrast", "conflict"});
    read(m, "plain", g.mix[0], "generate.mix");
    read(m, "negation", g.mix[1], "generate.mix");
    read(m, "contrast", g.mix[2], "generate.mix");
    read(m, "conflict", g.mix[3], "generate.mix");
  }
  if (j.contains("label_weights")) {
    const auto& m = j.at("label_weights");
    check_keys(m, "generate.label_weights", {"positive", "neutral", "negative"});
    read(m, "positive", g.label_weights[0], "generate.label_weights");
    read(m, "neutral", g.label_weights[1], "generate.label_weights");
    read(m, "negative", g.label_weights[2], "generate.label_weights");
  }
  if (j.contains("lexicons")) {
    const auto& l = j.at("lexicons");
    const std::string ls = "generate.lexicons";
    check_keys(l, ls, {"aspects", "positive", "negative", "neutral", "negators"});
    read(l, "aspects", g.lexicons.aspects, ls);
    read(l, "positive", g.lexicons.positive, ls);
    read(l, "negative", g.lexicons.negative, ls);
    read(l, "neutral", g.lexicons.neutral, ls);
    read(l, "negators", g.lexicons.negators, ls);
  }
}

}  // namespace

json run_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["model"] = model_to_json(c.model);
  j["train"] = train_to_json(c.train);
  j["data"] = {{"test_fraction", c.data.test_fraction}, {"split_seed", c.data.split_seed}};
  j["generate"] = gen_to_json(c.generate);
  j["workload"] = workload_json(c.workload);
  j["bench"] = {{"m_values", c.bench.m_values}, {"simulated", c.bench.simulated},
                {"warmup", c.bench.warmup}, {"iterations", c.bench.iterations},
                {"profile_length", c.bench.profile_length}};
  j["probes"] = {{"rand2l_trials", c.probes.rand2l_trials}, {"rand2l_seed", c.probes.rand2l_seed},
                 {"stress_percentile", c.probes.stress_percentile},
                 {"negation_min_length", c.probes.negation_min_length},
                 {"k_values", c.probes.k_values}};
  return j;
}

void run_from_json(const json& j, RunConfig& c) {
  check_keys(j, "config", {"seed", "out", "model", "train", "data", "generate", "workload", "bench", "probes"});
  read(j, "seed", c.seed, "config");
  read(j, "out", c.out, "config");
  if (j.contains("model")) model_from_json(j.at("model"), c.model);
  if (j.contains("train")) train_from_json(j.at("train"), c.train);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"test_fraction", "split_seed"});
    read(d, "test_fraction", c.data.test_fraction, "data");
    read(d, "split_seed", c.data.split_seed, "data");
  }
  if (j.contains("generate")) gen_from(j.at("generate"), c.generate);
  if (j.contains("workload")) workload_from(j.at("workload"), c.workload);
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    check_keys(b, "bench", {"m_values", "simulated", "warmup", "iterations", "profile_length"});
    read(b, "m_values", c.bench.m_values, "bench");
    read(b, "simulated", c.bench.simulated, "bench");
    read(b, "warmup", c.bench.warmup, "bench");
    read(b, "iterations", c.bench.iterations, "bench");
    read(b, "profile_length", c.bench.profile_length, "bench");
  }
  if (j.contains("probes")) {
    const auto& p = j.at("probes");
    check_keys(p, "probes", {"rand2l_trials", "rand2l_seed", "stress_percentile", "negation_min_length", "k_values"});
    read(p, "rand2l_trials", c.probes.rand2l_trials, "probes");
    read(p, "rand2l_seed", c.probes.rand2l_seed, "probes");
    read(p, "stress_percentile", c.probes.stress_percentile, "probes");
    read(p, "negation_min_length", c.probes.negation_min_length, "probes");
    read(p, "k_values", c.probes.k_values, "probes");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path + ": malformed JSON (" + e.what() + ")");
  }
  // Resolved configs written by the tool record the subcommand; replaying
  // one must not trip the unknown-key check.
  if (j.is_object()) j.erase("command");
  RunConfig c;
  run_from_json(j, c);
  return c;
}

}  // namespace dabs
