// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Inference-time depth probes and analysis protocols over a trained model.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dabs/corpus.hpp"
#include "dabs/depth_mask.hpp"
#include "dabs/model.hpp"
#include "dabs/train.hpp"

namespace dabs {

inline constexpr std::array<std::string_view, 3> kRegionNames{"shallow", "middle", "deep"};

struct RegionBands {
  std::array<DepthMask, 3> bands;  // shallow, middle, deep

  /// Contiguous thirds; ConfigError unless K is a positive multiple of 3.
  static RegionBands for_depth(std::size_t k);
  /// ConfigError unless the bands are disjoint and cover 1..K.
  void validate(std::size_t k) const;
};

struct RegionReport {
  std::string config;
  double base_mf1 = 0;
  std::array<double, 3> band_mf1{};
  double delta = 0;  // best - worst band
  std::size_t best = 0;
};

template <typename T>
RegionReport region_sweep(const DabsModel<T>& model, const Corpus& corpus,
                          const RegionBands& bands, const std::string& config = "DABS");
void write_region_csv(std::ostream& out, const std::vector<RegionReport>& rows);

struct Rand2LReport {
  std::vector<std::size_t> starts;  // first level of each sampled band
  std::vector<double> mf1;
  double mean = 0;
  double stddev = 0;  // sample standard deviation (0 for one trial)
};

/// Each trial keeps a uniformly drawn contiguous 2-level band.
template <typename T>
Rand2LReport rand2l_trials(const DabsModel<T>& model, const Corpus& corpus,
                           std::size_t trials = 20, std::uint64_t seed = 0);

struct SingleLayerReport {
  std::vector<double> mf1;  // one entry per level
  std::size_t best = 0, worst = 0;  // 1-based levels
  double delta = 0;
};

template <typename T>
SingleLayerReport single_layer_controls(const DabsModel<T>& model, const Corpus& corpus);

struct DepthControlRow {
  std::string config;
  double base_mf1 = 0;
  Rand2LReport rand2l;
  SingleLayerReport single;
};
void write_depth_control_csv(std::ostream& out, const std::vector<DepthControlRow>& rows);

// no, not, never, without, and any token ending in n't.
bool is_negation_cue(std::string_view token);
bool has_negation_cue(const std::vector<std::string>& tokens);

struct NegationShift {
  std::array<double, 3> negated_pp{};
  std::array<double, 3> plain_pp{};
  std::array<double, 3> delta_pp{};  // negated - plain
  std::size_t n_negated = 0, n_plain = 0;
  bool insufficient = false;  // a group is empty
};

/// Aspect-instance means of the alpha mass per region, in percentage points.
/// Traces are matched to sentences by id.
NegationShift negation_shift(const std::vector<SelectionTrace>& traces, const Corpus& corpus,
                             const RegionBands& bands);

struct StressParams {
  double percentile = 90.0;
  std::size_t negation_min_length = 40;  // strictly longer sentences qualify
};

struct StressSplits {
  std::size_t length_threshold = 0;  // nearest-rank percentile of token lengths
  Corpus long_sentences;
  Corpus conflict;
  Corpus negation;
};

/// Nearest-rank percentile of a nonempty sample.
std::size_t nearest_rank_percentile(std::vector<std::size_t> values, double percentile);
StressSplits build_stress_splits(const Corpus& corpus, const StressParams& params = {});

enum class Ablation : std::uint8_t {
  kNone = 0,
  kTokenSel,
  kLayerSel,
  kGatedFusion,
  kDepthGru,
  kLcp,
  kSparsity,
  kSpanMask,
  kGateEntropy,
};

inline constexpr std::array<Ablation, 8> kAllAblations{
    Ablation::kTokenSel, Ablation::kLayerSel, Ablation::kGatedFusion, Ablation::kDepthGru,
    Ablation::kLcp,      Ablation::kSparsity, Ablation::kSpanMask,    Ablation::kGateEntropy};

/// Row label used in reports, e.g. "- Token Sel.".
std::string_view ablation_label(Ablation a);
/// Short key, e.g. "token_sel".
std::string_view ablation_key(Ablation a);
/// Accepts the key or the label. ConfigError otherwise.
Ablation parse_ablation(std::string_view name);
void apply_ablation(Ablation a, ModelConfig& model, LossWeights& loss);

struct OrderRun {
  LayerOrder order = LayerOrder::kNormal;
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
};

/// The run grid of the layer-order ablation: every order is trained with the
/// same protocol and seeds, only the layer order differs.
std::vector<OrderRun> layer_order_protocol(const ModelConfig& base, const TrainConfig& train,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::uint64_t shuffle_seed);
/// True when runs differ in nothing but layer order within each seed.
bool protocol_parity(const std::vector<OrderRun>& runs);

}  // namespace dabs
