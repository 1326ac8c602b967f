// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "dabs/error.hpp"

namespace dabs {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(clip > 0.0)) throw ConfigError("train: clip must be > 0");
  if (!(optim.lr > 0.0)) throw ConfigError("train: learning rate must be > 0");
  loss.validate();
}

namespace {

void require_ids(const Sentence& s) {
  if (s.ids.size() != s.tokens.size())
    throw InputError("sentence " + s.id + " has no vocabulary ids attached");
}

template <typename T>
std::vector<AspectQuery> labelled(const Sentence& s) {
  std::vector<AspectQuery> q;
  for (const auto& a : s.aspects)
    if (a.query.label) q.push_back(a.query);
  return q;
}

}  // namespace

template <typename T>
Predictions predict(const DabsModel<T>& model, const Corpus& corpus, const DepthMask* mask,
                    bool with_traces, bool reuse) {
  NoGradGuard no_grad;
  ForwardContext ctx;
  Predictions out;
  double loss = 0.0;
  for (const auto& s : corpus) {
    require_ids(s);
    const auto queries = labelled<T>(s);
    if (queries.empty()) continue;
    const auto readouts = model.forward(s.ids, queries, ctx, reuse, mask);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto& r = readouts[i];
      out.predicted.push_back(static_cast<Label>(r.prediction()));
      out.gold.push_back(*queries[i].label);
      loss += static_cast<double>(classification_loss(r.logits, *queries[i].label).item());
      if (with_traces) out.traces.push_back(make_trace(r, queries[i], s.id));
    }
  }
  if (!out.gold.empty()) out.loss = loss / static_cast<double>(out.gold.size());
  return out;
}

template <typename T>
EvalReport evaluate_model(const DabsModel<T>& model, const Corpus& corpus,
                          const DepthMask* mask) {
  const Predictions p = predict(model, corpus, mask);
  EvalReport r = evaluate(p.predicted, p.gold);
  r.loss = p.loss;
  return r;
}

void write_metrics_header(std::ostream& out) {
  out << "epoch,split,acc,mf1,f1_pos,f1_neu,f1_neg,loss,seed\n";
}

void write_metrics_row(std::ostream& out, std::size_t epoch, const char* split,
                       const EvalReport& r, std::uint64_t seed) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%llu\n", epoch, split,
                r.accuracy, r.macro_f1, r.f1[0], r.f1[1], r.f1[2], r.loss,
                static_cast<unsigned long long>(seed));
  out << buf;
}

template <typename T>
TrainResult train(DabsModel<T>& model, const Corpus& train_set, const Corpus& test_set,
                  const TrainConfig& cfg, std::ostream* metrics_csv,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    require_ids(train_set[i]);
    if (!labelled<T>(train_set[i]).empty()) usable.push_back(i);
  }
  if (usable.empty()) throw InputError("train: no labelled training sentences");

  auto& params = model.params();
  AdamW<T> optimizer(params, cfg.optim);
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  ForwardContext ctx{true, &dropout_rng};

  TrainResult result;
  std::vector<std::vector<T>> best_values;
  if (metrics_csv) write_metrics_header(*metrics_csv);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_range(usable.begin(), usable.end(), shuffle_rng);
    std::vector<Label> train_pred, train_gold;
    double loss_sum = 0.0;
    std::size_t pos = 0;
    while (pos < usable.size()) {
      // A batch is a run of whole sentences holding at least batch_size aspects.
      std::size_t end = pos, instances = 0;
      while (end < usable.size() && instances < cfg.batch_size)
        instances += labelled<T>(train_set[usable[end++]]).size();
      params.zero_grad();
      for (std::size_t b = pos; b < end; ++b) {
        const Sentence& s = train_set[usable[b]];
        const auto queries = labelled<T>(s);
        const auto readouts = model.forward(s.ids, queries, ctx, true);
        LossParts parts;
        Tensor<T> loss = total_loss(readouts, queries, cfg.loss, &parts);
        if (!std::isfinite(parts.total))
          throw TrainingError("non-finite loss on sentence " + s.id);
        const T share = static_cast<T>(queries.size()) / static_cast<T>(instances);
        scale(loss, share).backward();
        loss_sum += parts.total * static_cast<double>(queries.size());
        for (std::size_t i = 0; i < queries.size(); ++i) {
          train_pred.push_back(static_cast<Label>(readouts[i].prediction()));
          train_gold.push_back(*queries[i].label);
        }
      }
      clip_grad_norm(params, cfg.clip);
      optimizer.step();
      pos = end;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = evaluate(train_pred, train_gold);
    rec.train.loss = loss_sum / static_cast<double>(train_gold.size());
    rec.test = evaluate_model(model, test_set);
    if (metrics_csv) {
      write_metrics_row(*metrics_csv, epoch, "train", rec.train, cfg.seed);
      write_metrics_row(*metrics_csv, epoch, "test", rec.test, cfg.seed);
    }
    if (result.best_epoch == 0 || rec.test.macro_f1 > result.best.macro_f1) {
      result.best_epoch = epoch;
      result.best = rec.test;
      best_values.clear();
      for (const auto& p : params.items()) best_values.push_back(p.tensor.to_vector());
    }
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto dst = items[i].tensor.mutable_data();
    std::copy(best_values[i].begin(), best_values[i].end(), dst.begin());
  }
  params.zero_grad();
  return result;
}

#define DABS_INSTANTIATE_TRAIN(T)                                                         \
  template Predictions predict(const DabsModel<T>&, const Corpus&, const DepthMask*, bool,  \
                               bool);                                                     \
  template EvalReport evaluate_model(const DabsModel<T>&, const Corpus&, const DepthMask*); \
  template TrainResult train(DabsModel<T>&, const Corpus&, const Corpus&,                 \
                             const TrainConfig&, std::ostream*, const EpochCallback&);

DABS_INSTANTIATE_TRAIN(float)
DABS_INSTANTIATE_TRAIN(double)

}  // namespace dabs
