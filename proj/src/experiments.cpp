// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "dabs/checkpoint.hpp"
#include "dabs/config.hpp"
#include "dabs/error.hpp"

namespace dabs {

Dataset make_dataset(const Corpus& corpus, double test_fraction, std::uint64_t split_seed) {
  if (corpus.empty()) throw InputError("dataset: empty corpus");
  Dataset d;
  std::tie(d.train, d.test) = split_corpus(corpus, test_fraction, split_seed);
  if (d.train.empty()) throw InputError("dataset: the split leaves no training sentences");
  d.vocab = Vocab::build(d.train);
  d.vocab.attach(d.train);
  d.vocab.attach(d.test);
  return d;
}

TrainedModel train_variant(const Dataset& data, ModelConfig model, TrainConfig train_cfg,
                           std::uint64_t seed, std::ostream* metrics_csv) {
  model.encoder.vocab_size = data.vocab.size();
  std::size_t longest = 0;
  for (const auto* part : {&data.train, &data.test})
    for (const auto& s : *part) longest = std::max(longest, s.tokens.size());
  model.encoder.max_len = std::max(model.encoder.max_len, longest);
  train_cfg.seed = seed;
  TrainedModel out;
  out.model = std::make_unique<DabsModel<float>>(model, derive_seed(seed, 0));
  out.result = train(*out.model, data.train, data.test, train_cfg, metrics_csv);
  return out;
}

double SeedRow::mean_mf1() const {
  return mf1.empty() ? 0.0 : std::accumulate(mf1.begin(), mf1.end(), 0.0) / static_cast<double>(mf1.size());
}

double SeedRow::mean_acc() const {
  return acc.empty() ? 0.0 : std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

std::vector<ComparisonRow> compare_to(const SeedRow& reference, const std::vector<SeedRow>& rows) {
  std::vector<ComparisonRow> out;
  for (const auto& r : rows) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < r.seeds.size(); ++i)
      for (std::size_t j = 0; j < reference.seeds.size(); ++j)
        if (r.seeds[i] == reference.seeds[j]) {
          a.push_back(r.mf1[i]);
          b.push_back(reference.mf1[j]);
        }
    ComparisonRow c;
    c.row = r;
    if (a.size() >= 2) {
      c.versus_reference = paired_t_test(a, b);
    } else if (!a.empty()) {
      c.versus_reference.mean_diff = a[0] - b[0];
      c.versus_reference.degenerate = true;
    }
    out.push_back(c);
  }
  return out;
}

void write_comparison_csv(std::ostream& out, const SeedRow& reference,
                          const std::vector<ComparisonRow>& rows) {
  out << "config,seeds,mf1_per_seed,mean_acc,mean_mf1,delta_vs_" << reference.config
      << ",t,p,degenerate\n";
  for (const auto& c : rows) {
    std::string seeds, scores;
    for (std::size_t i = 0; i < c.row.seeds.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%.6f", i ? ";" : "", c.row.mf1[i]);
      scores += buf;
      seeds += (i ? ";" : "") + std::to_string(c.row.seeds[i]);
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6g,%.6g,%s", c.row.mean_acc(), c.row.mean_mf1(),
                  c.versus_reference.mean_diff, c.versus_reference.t, c.versus_reference.p,
                  c.versus_reference.degenerate ? "true" : "false");
    out << '"' << c.row.config << "\"," << seeds << ',' << scores << ',' << buf << '\n';
  }
}

void save_model_dir(const std::string& dir, const DabsModel<float>& model, const Vocab& vocab) {
  std::filesystem::create_directories(dir);
  io::save_checkpoint(model.params(), dir + "/model.dabs");
  vocab.save(dir + "/vocab.json");
  std::ofstream out(dir + "/model_config.json");
  if (!out) throw InputError("cannot write " + dir + "/model_config.json");
  out << model_to_json(model.config()).dump(2) << '\n';
}

LoadedModel load_model_dir(const std::string& dir) {
  std::ifstream in(dir + "/model_config.json");
  if (!in) throw InputError("cannot open " + dir + "/model_config.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(dir + "/model_config.json: malformed JSON (" + e.what() + ")");
  }
  ModelConfig cfg;
  model_from_json(j, cfg);
  LoadedModel out;
  out.vocab = Vocab::load(dir + "/vocab.json");
  if (out.vocab.size() != cfg.encoder.vocab_size)
    throw InputError(dir + ": vocabulary size " + std::to_string(out.vocab.size()) +
                     " does not match the model's " + std::to_string(cfg.encoder.vocab_size));
  out.model = std::make_unique<DabsModel<float>>(cfg, 0);
  io::load_checkpoint(out.model->params(), dir + "/model.dabs");
  return out;
}

}  // namespace dabs
