// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// JSON form of every configurable section. Readers reject unknown keys and
// keep defaults for absent ones.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dabs/controls.hpp"
#include "dabs/corpus.hpp"
#include "dabs/costbench.hpp"
#include "dabs/model.hpp"
#include "dabs/train.hpp"

namespace dabs {

struct DataConfig {
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
};

struct ProbeConfig {
  std::size_t rand2l_trials = 20;
  std::uint64_t rand2l_seed = 0;
  double stress_percentile = 90.0;
  std::size_t negation_min_length = 40;
  std::vector<std::size_t> k_values;  // K sweep; empty skips it
};

struct BenchConfig {
  std::vector<std::size_t> m_values{1, 2, 3, 4, 5, 6, 7, 8};
  bool simulated = false;
  std::size_t warmup = 20;
  std::size_t iterations = 100;
  std::size_t profile_length = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = ".";
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  GenSpec generate;
  WorkloadSpec workload;
  BenchConfig bench;
  ProbeConfig probes;
};

nlohmann::json model_to_json(const ModelConfig& c);
nlohmann::json train_to_json(const TrainConfig& c);
nlohmann::json gen_to_json(const GenSpec& g);
nlohmann::json run_to_json(const RunConfig& c);

/// Overlays `j` on the defaults held in `c`. ConfigError on unknown keys or
/// mistyped values.
void model_from_json(const nlohmann::json& j, ModelConfig& c);
void train_from_json(const nlohmann::json& j, TrainConfig& c);
void run_from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);

}  // namespace dabs
