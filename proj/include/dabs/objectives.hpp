// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Training objective and evaluation metrics.
//
//   loss = mean CE + l_s * mean R_sparse + l_m * mean R_mask + l_ent * mean R_gate
//   R_sparse = mean_t w_t
//   R_mask   = mean_t -ln(1 - clamp(w_t m_t, 0, 1 - 1e-7))   (m: span indicator)
//   R_gate   = sum_i g_i ln g_i

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dabs/acbs.hpp"
#include "dabs/layers.hpp"

namespace dabs {

struct LossWeights {
  double lambda_s = 1e-3;
  double lambda_m = 1e-3;
  double lambda_ent = 1e-2;
  bool mask_l1 = false;  // mean |w * m| instead of the BCE form

  void validate() const;
};

/// InputError when the label is not one of the three classes.
template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, Label gold);
template <typename T>
Tensor<T> reg_sparsity(const Tensor<T>& w);
/// `mask` holds 0/1 per position.
template <typename T>
Tensor<T> reg_span_mask(const Tensor<T>& w, const std::vector<T>& mask, bool l1 = false);
template <typename T>
std::vector<T> span_indicator(std::size_t n, const AspectQuery& q);
template <typename T>
Tensor<T> reg_gate_entropy(const Tensor<T>& g);

struct LossParts {
  double ce = 0, sparse = 0, mask = 0, gate = 0, total = 0;
};

/// Mean over the aspect instances. Regularizers of an ablated selector are
/// skipped (their inputs are fixed substitutes). Every query needs a label.
template <typename T>
Tensor<T> total_loss(const std::vector<AspectReadout<T>>& readouts,
                     const std::vector<AspectQuery>& queries, const LossWeights& weights,
                     LossParts* parts = nullptr);

/// Global L2 norm of all gradients; rescales them to `max_norm` when above.
template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay, applied to matrices only (biases, gains, scalars
/// are not decayed).
template <typename T>
class AdamW {
 public:
  AdamW(ParameterSet<T>& params, const AdamWConfig& cfg);
  /// Throws TrainingError naming the first parameter with a non-finite gradient.
  void step();
  std::size_t steps() const { return t_; }

 private:
  ParameterSet<T>* params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0;
  double macro_f1 = 0;
  std::array<double, kNumLabels> precision{}, recall{}, f1{};
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};  // [gold][pred]
  double loss = 0;  // filled by callers that have one
};

/// InputError on length mismatch. A class absent from both gold and
/// prediction counts as F1 = 0 in the macro average.
EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> golds);

struct TTestResult {
  double mean_diff = 0;
  double t = 0;
  double p = 1;
  std::size_t df = 0;
  bool significant = false;  // at 0.05
  bool degenerate = false;   // zero variance of the differences
};

/// Two-sided paired t-test on matched per-seed scores, difference a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace dabs
