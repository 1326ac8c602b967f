// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "dabs/error.hpp"

namespace dabs {

using detail::Node;

void LossWeights::validate() const {
  if (!(lambda_s >= 0.0) || !(lambda_m >= 0.0) || !(lambda_ent >= 0.0))
    throw ConfigError("loss weights must be nonnegative");
}

template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, Label gold) {
  const auto g = static_cast<std::size_t>(gold);
  if (g >= kNumLabels) throw InputError("invalid gold label " + std::to_string(g));
  return cross_entropy(logits, g);
}

template <typename T>
Tensor<T> reg_sparsity(const Tensor<T>& w) {
  return mean(w);
}

template <typename T>
std::vector<T> span_indicator(std::size_t n, const AspectQuery& q) {
  q.validate(n);
  std::vector<T> m(n, T(0));
  for (std::size_t t = q.first; t <= q.last; ++t) m[t - 1] = T(1);
  return m;
}

template <typename T>
Tensor<T> reg_span_mask(const Tensor<T>& w, const std::vector<T>& mask, bool l1) {
  const std::size_t n = w.numel();
  if (mask.size() != n)
    throw DimensionError("reg_span_mask: mask has " + std::to_string(mask.size()) +
                         " entries for " + std::to_string(n) + " gates");
  const auto ws = w.data();
  const T cap = T(1) - T(1e-7);
  const T inv_n = T(1) / static_cast<T>(n);
  T total = 0;
  std::vector<T> dloss(n, T(0));
  for (std::size_t t = 0; t < n; ++t) {
    const T p = ws[t] * mask[t];
    if (l1) {
      total += std::abs(p);
      dloss[t] = (p > 0 ? T(1) : p < 0 ? T(-1) : T(0)) * mask[t] * inv_n;
      continue;
    }
    const T clamped = std::clamp(p, T(0), cap);
    total += -std::log(T(1) - clamped);
    // Gradient vanishes where the clamp is active.
    if (p > T(0) && p < cap) dloss[t] = mask[t] / (T(1) - clamped) * inv_n;
  }
  return record_op<T>(Shape{}, {total * inv_n}, {w}, [dloss](Node<T>& out) {
    Node<T>& nw = *out.parents[0];
    if (!nw.requires_grad) return;
    auto& g = nw.ensure_grad();
    for (std::size_t t = 0; t < g.size(); ++t) g[t] += out.grad[0] * dloss[t];
  });
}

template <typename T>
Tensor<T> reg_gate_entropy(const Tensor<T>& g) {
  const auto gs = g.data();
  T total = 0;
  std::vector<T> d(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (gs[i] > T(0)) total += gs[i] * std::log(gs[i]);
    const T safe = std::max(gs[i], std::numeric_limits<T>::min());
    d[i] = std::log(safe) + T(1);
  }
  return record_op<T>(Shape{}, {total}, {g}, [d](Node<T>& out) {
    Node<T>& ng = *out.parents[0];
    if (!ng.requires_grad) return;
    auto& grad = ng.ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += out.grad[0] * d[i];
  });
}

template <typename T>
Tensor<T> total_loss(const std::vector<AspectReadout<T>>& readouts,
                     const std::vector<AspectQuery>& queries, const LossWeights& weights,
                     LossParts* parts) {
  weights.validate();
  if (readouts.empty() || readouts.size() != queries.size())
    throw InputError("total_loss: " + std::to_string(readouts.size()) + " readouts for " +
                     std::to_string(queries.size()) + " queries");
  const T inv = T(1) / static_cast<T>(readouts.size());
  LossParts lp;
  std::vector<Tensor<T>> terms;
  terms.reserve(readouts.size() * 4);
  for (std::size_t i = 0; i < readouts.size(); ++i) {
    const auto& r = readouts[i];
    const auto& q = queries[i];
    if (!q.label) throw InputError("total_loss: aspect query without a gold label");
    Tensor<T> ce = classification_loss(r.logits, *q.label);
    lp.ce += static_cast<double>(ce.item());
    terms.push_back(ce);
    if (r.learned_w) {
      Tensor<T> rs = reg_sparsity(r.w);
      Tensor<T> rm = reg_span_mask(r.w, span_indicator<T>(r.w.numel(), q), weights.mask_l1);
      lp.sparse += static_cast<double>(rs.item());
      lp.mask += static_cast<double>(rm.item());
      if (weights.lambda_s > 0) terms.push_back(scale(rs, static_cast<T>(weights.lambda_s)));
      if (weights.lambda_m > 0) terms.push_back(scale(rm, static_cast<T>(weights.lambda_m)));
    }
    if (r.learned_g) {
      Tensor<T> rg = reg_gate_entropy(r.g);
      lp.gate += static_cast<double>(rg.item());
      if (weights.lambda_ent > 0)
        terms.push_back(scale(rg, static_cast<T>(weights.lambda_ent)));
    }
  }
  Tensor<T> stacked = concat_cols(
      [&] {
        std::vector<Tensor<T>> v;
        v.reserve(terms.size());
        for (auto& t : terms) v.push_back(reshape(t, {1}));
        return v;
      }());
  Tensor<T> loss = scale(sum(stacked), inv);
  if (parts) {
    const double n = static_cast<double>(readouts.size());
    lp.ce /= n;
    lp.sparse /= n;
    lp.mask /= n;
    lp.gate /= n;
    lp.total = static_cast<double>(loss.item());
    *parts = lp;
  }
  return loss;
}

template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params.items()) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.mutable_grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& p : params.items()) {
      if (!p.tensor.has_grad()) continue;
      for (T& g : p.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

template <typename T>
AdamW<T>::AdamW(ParameterSet<T>& params, const AdamWConfig& cfg) : params_(&params), cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adamw: learning rate must be > 0");
  if (cfg.weight_decay < 0.0) throw ConfigError("adamw: weight decay must be >= 0");
  for (const auto& p : params.items()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void AdamW<T>::step() {
  auto& items = params_->items();
  for (auto& p : items) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.mutable_grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw TrainingError("non-finite gradient in parameter " + p.name);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i];
    auto values = p.tensor.mutable_data();
    const bool decay = p.tensor.rank() >= 2 && cfg_.weight_decay > 0.0;
    if (!p.tensor.has_grad()) {
      if (decay)
        for (auto& x : values) x -= static_cast<T>(cfg_.lr * cfg_.weight_decay * x);
      continue;
    }
    const auto grad = p.tensor.mutable_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      double x = values[j];
      if (decay) x -= cfg_.lr * cfg_.weight_decay * x;
      x -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      values[j] = static_cast<T>(x);
    }
  }
}

EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> golds) {
  if (predictions.size() != golds.size())
    throw InputError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(golds.size()) + " gold labels");
  EvalReport r;
  r.n = golds.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto g = static_cast<std::size_t>(golds[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    if (g >= kNumLabels || p >= kNumLabels) throw InputError("evaluate: invalid label");
    ++r.confusion[g][p];
    if (g == p) ++correct;
  }
  r.accuracy = r.n ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::size_t tp = r.confusion[c][c], gold_c = 0, pred_c = 0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      gold_c += r.confusion[c][k];
      pred_c += r.confusion[k][c];
    }
    r.precision[c] = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    r.recall[c] = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / denom : 0.0;
    f1_sum += r.f1[c];
  }
  r.macro_f1 = f1_sum / static_cast<double>(kNumLabels);
  return r;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("paired_t_test: unequal sample sizes");
  if (a.size() < 2) throw InputError("paired_t_test: need at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    mean += d[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  TTestResult r;
  r.mean_diff = mean;
  r.df = n - 1;
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) {
    r.degenerate = true;
    r.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = 0.0;
    r.significant = false;
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.significant = r.p < 0.05;
  return r;
}

#define DABS_INSTANTIATE_OBJECTIVES(T)                                                  \
  template Tensor<T> classification_loss(const Tensor<T>&, Label);                     \
  template Tensor<T> reg_sparsity(const Tensor<T>&);                                   \
  template Tensor<T> reg_span_mask(const Tensor<T>&, const std::vector<T>&, bool);     \
  template std::vector<T> span_indicator<T>(std::size_t, const AspectQuery&);          \
  template Tensor<T> reg_gate_entropy(const Tensor<T>&);                               \
  template Tensor<T> total_loss(const std::vector<AspectReadout<T>>&,                  \
                                const std::vector<AspectQuery>&, const LossWeights&,   \
                                LossParts*);                                           \
  template double clip_grad_norm(ParameterSet<T>&, double);                            \
  template class AdamW<T>;

DABS_INSTANTIATE_OBJECTIVES(float)
DABS_INSTANTIATE_OBJECTIVES(double)

}  // namespace dabs
