// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dabs/corpus.hpp"
#include "dabs/model.hpp"
#include "dabs/objectives.hpp"

namespace dabs {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;  // aspect instances per optimizer step (at least)
  AdamWConfig optim;
  double clip = 1.0;
  LossWeights loss;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  EvalReport train;       // predictions taken during the training pass
  EvalReport test;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  EvalReport best;  // test report of the best epoch (by macro-F1)
};

struct Predictions {
  std::vector<Label> predicted;
  std::vector<Label> gold;
  std::vector<SelectionTrace> traces;  // filled on request
  double loss = 0;                     // mean cross-entropy
};

/// Eval-mode readout of every labelled aspect. Sentences need vocabulary ids.
template <typename T>
Predictions predict(const DabsModel<T>& model, const Corpus& corpus,
                    const DepthMask* mask = nullptr, bool with_traces = false,
                    bool reuse = true);

template <typename T>
EvalReport evaluate_model(const DabsModel<T>& model, const Corpus& corpus,
                          const DepthMask* mask = nullptr);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place, evaluating on `test` after every epoch. The parameters of
/// the best epoch are restored before returning. When `metrics_csv` is given
/// a header and two rows per epoch (train, test) are written.
template <typename T>
TrainResult train(DabsModel<T>& model, const Corpus& train_set, const Corpus& test_set,
                  const TrainConfig& cfg, std::ostream* metrics_csv = nullptr,
                  const EpochCallback& on_epoch = {});

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, std::size_t epoch, const char* split,
                       const EvalReport& r, std::uint64_t seed);

}  // namespace dabs
