// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Recipes shared by the command-line tool and the acceptance suite.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dabs/controls.hpp"
#include "dabs/corpus.hpp"
#include "dabs/model.hpp"
#include "dabs/objectives.hpp"
#include "dabs/train.hpp"

namespace dabs {

struct Dataset {
  Corpus train;
  Corpus test;
  Vocab vocab;  // built from the training part
};

/// Splits, builds the vocabulary and attaches ids to both parts.
Dataset make_dataset(const Corpus& corpus, double test_fraction, std::uint64_t split_seed);

struct TrainedModel {
  std::unique_ptr<DabsModel<float>> model;
  TrainResult result;
};

/// The seed drives initialization, shuffling and dropout. The encoder
/// vocabulary is sized from the dataset.
TrainedModel train_variant(const Dataset& data, ModelConfig model, TrainConfig train,
                           std::uint64_t seed, std::ostream* metrics_csv = nullptr);

struct SeedRow {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<double> mf1;  // best-epoch test macro-F1 per seed
  std::vector<double> acc;

  double mean_mf1() const;
  double mean_acc() const;
};

struct ComparisonRow {
  SeedRow row;
  TTestResult versus_reference;  // row - reference, paired by seed
};

/// Pairs every row with the reference row by seed.
std::vector<ComparisonRow> compare_to(const SeedRow& reference, const std::vector<SeedRow>& rows);
/// config, seeds, per-seed MF1, mean Acc/MF1, delta, t, p, degenerate.
void write_comparison_csv(std::ostream& out, const SeedRow& reference,
                          const std::vector<ComparisonRow>& rows);

/// Saves checkpoint, vocabulary and resolved model configuration to `dir`.
void save_model_dir(const std::string& dir, const DabsModel<float>& model, const Vocab& vocab);
struct LoadedModel {
  std::unique_ptr<DabsModel<float>> model;
  Vocab vocab;
};
LoadedModel load_model_dir(const std::string& dir);

}  // namespace dabs
