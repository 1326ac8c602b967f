#include <cmath>
#include <numbers>

#include "dabs/error.hpp"
#include "dabs/objectives.hpp"
#include "testing.hpp"

using namespace dabs;
using dabs::testing::grad_check;
using dabs::testing::uniform_tensor;
using D = Tensor<double>;

TEST_SUITE("objectives") {

TEST_CASE("classification loss examples") {
  CHECK(classification_loss(D::from({3}, {100, 0, 0}), Label::kPositive).item() == doctest::Approx(0.0));
  CHECK(classification_loss(D::zeros({3}), Label::kNeutral).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  const double e2 = std::exp(2.0);
  CHECK(classification_loss(D::from({3}, {2, 0, 0}), Label::kPositive).item() ==
        doctest::Approx(-std::log(e2 / (e2 + 2))).epsilon(1e-12));
  CHECK_THROWS_AS((void)classification_loss(D::zeros({3}), static_cast<Label>(7)), InputError);
}

TEST_CASE("sparsity regularizer") {
  CHECK(reg_sparsity(D::zeros({5})).item() == 0.0);
  CHECK(reg_sparsity(D::full({5}, 1.0)).item() == 1.0);
  CHECK(reg_sparsity(D::from({4}, {0.2, 0.4, 0.6, 0.8})).item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("span-mask regularizer") {
  const auto m = span_indicator<double>(4, AspectQuery{3, 4});
  CHECK(m == std::vector<double>{0, 0, 1, 1});
  CHECK(reg_span_mask(D::from({4}, {0.9, 0.7, 0.0, 0.0}), m).item() == 0.0);
  CHECK(reg_span_mask(D::from({4}, {0.5, 0.9, 0.5, 0.0}), m).item() ==
        doctest::Approx(-std::log(0.5) / 4).epsilon(1e-12));
  CHECK(std::isfinite(reg_span_mask(D::from({4}, {1, 1, 1, 1}), m).item()));
  CHECK(reg_span_mask(D::from({4}, {0.5, 0.9, 0.5, 0.0}), m, true).item() == doctest::Approx(0.125));
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    D w = uniform_tensor({4}, rng, 0.0, 0.99);
    const double before = reg_span_mask(w, m).item();
    auto bumped = w.to_vector();
    bumped[2] = std::min(0.999, bumped[2] + 0.2 * uniform01(rng));
    CHECK(reg_span_mask(D::from({4}, bumped), m).item() >= before);
  }
}

TEST_CASE("gate entropy regularizer") {
  CHECK(std::abs(reg_gate_entropy(D::full({3}, 1.0 / 3)).item() + std::log(3.0)) < 1e-9);
  CHECK(reg_gate_entropy(D::from({3}, {0, 0, 1})).item() == 0.0);
  CHECK(reg_gate_entropy(D::from({3}, {0.5, 0.25, 0.25})).item() == doctest::Approx(-1.0397).epsilon(1e-4));
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = softmax(uniform_tensor({3}, rng, -3, 3));
    const double r = reg_gate_entropy(g).item();
    CHECK(r >= -std::log(3.0) - 1e-12);
    CHECK(r <= 1e-12);
  }
}

TEST_CASE("regularizer gradients") {
  Rng rng(3);
  D z = uniform_tensor({3}, rng), w = uniform_tensor({6}, rng);
  const auto mask = span_indicator<double>(6, AspectQuery{2, 4});
  CHECK(grad_check({z}, [&] { return reg_gate_entropy(softmax(z)); }, 1e-4).failed == 0);
  CHECK(grad_check({w}, [&] { return reg_span_mask(sigmoid(w), mask); }, 1e-4).failed == 0);
  CHECK(grad_check({w}, [&] { return reg_span_mask(sigmoid(w), mask, true); }, 1e-4).failed == 0);
  CHECK(grad_check({w}, [&] { return reg_sparsity(sigmoid(w)); }, 1e-4).failed == 0);
}

TEST_CASE("total loss assembly") {
  Rng rng(4);
  std::vector<AspectReadout<double>> rs(2);
  std::vector<AspectQuery> qs{{1, 2, Label::kPositive}, {3, 3, Label::kNegative}};
  for (auto& r : rs) {
    r.w = sigmoid(uniform_tensor({4}, rng));
    r.g = softmax(uniform_tensor({3}, rng));
    r.logits = uniform_tensor({3}, rng);
    r.learned_w = r.learned_g = true;
  }
  LossWeights zero{0, 0, 0, false};
  LossParts parts;
  const double ce = (classification_loss(rs[0].logits, Label::kPositive).item() +
                     classification_loss(rs[1].logits, Label::kNegative).item()) / 2;
  CHECK(total_loss(rs, qs, zero, &parts).item() == doctest::Approx(ce).epsilon(1e-14));

  LossWeights lw{0.1, 0.2, 0.3, false};
  std::vector<AspectReadout<double>> one{rs[0]};
  std::vector<AspectQuery> q1{qs[0]};
  const double hand = classification_loss(rs[0].logits, Label::kPositive).item() +
                      0.1 * reg_sparsity(rs[0].w).item() +
                      0.2 * reg_span_mask(rs[0].w, span_indicator<double>(4, qs[0])).item() +
                      0.3 * reg_gate_entropy(rs[0].g).item();
  CHECK(total_loss(one, q1, lw, &parts).item() == doctest::Approx(hand).epsilon(1e-14));
  CHECK(parts.total == doctest::Approx(hand));

  // Ablated selectors contribute no regularizer.
  one[0].learned_w = one[0].learned_g = false;
  CHECK(total_loss(one, q1, lw).item() ==
        doctest::Approx(classification_loss(rs[0].logits, Label::kPositive).item()));
  std::vector<AspectQuery> unlabeled{{1, 2}};
  CHECK_THROWS((void)total_loss(one, unlabeled, lw));
}

TEST_CASE("gradient clipping") {
  Rng rng(5);
  ParameterSet<double> ps;
  auto a = ps.create("a", {3}, Init::zeros(), rng);
  auto b = ps.create("b", {2, 2}, Init::zeros(), rng);
  std::vector<double> ga{3, 0, 4}, gb{0, 0, 0, 0};
  std::copy(ga.begin(), ga.end(), a.mutable_grad().begin());
  (void)b.mutable_grad();
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  double sq = 0;
  for (double g : a.grad()) sq += g * g;
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  // below the limit nothing changes
  CHECK(clip_grad_norm(ps, 2.0) == doctest::Approx(1.0));
  CHECK(a.grad()[2] == doctest::Approx(0.8));
}

TEST_CASE("AdamW single step and failure modes") {
  Rng rng(6);
  ParameterSet<double> ps;
  auto w = ps.create("w", {1, 1}, Init::constant(2.0), rng);
  auto b = ps.create("b", {1}, Init::constant(2.0), rng);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW<double> opt(ps, cfg);
  w.mutable_grad()[0] = 0.3;
  b.mutable_grad()[0] = 0.3;
  opt.step();
  // m_hat = g, v_hat = g^2 after one step.
  const double step = 0.1 * 0.3 / (0.3 + 1e-8);
  CHECK(w.data()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0 - step).epsilon(1e-14));
  CHECK(b.data()[0] == doctest::Approx(2.0 - step).epsilon(1e-14));

  ParameterSet<double> still;
  auto s = still.create("s", {2, 2}, Init::constant(1.5), rng);
  cfg.weight_decay = 0.0;
  AdamW<double> idle(still, cfg);
  (void)s.mutable_grad();
  idle.step();
  for (double v : s.to_vector()) CHECK(v == 1.5);

  s.mutable_grad()[1] = std::nan("");
  try {
    idle.step();
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("s") != std::string::npos);
  }
}

TEST_CASE("evaluation report examples") {
  using L = Label;
  std::vector<L> all{L::kPositive, L::kNeutral, L::kNegative};
  auto r = evaluate(all, all);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  std::vector<L> gold{L::kPositive, L::kPositive, L::kNegative, L::kNegative};
  std::vector<L> pred{L::kPositive, L::kNegative, L::kNegative, L::kNegative};
  r = evaluate(pred, gold);
  CHECK(r.accuracy == 0.75);
  CHECK(r.f1[0] == doctest::Approx(2.0 / 3));
  CHECK(r.f1[1] == 0.0);
  CHECK(r.f1[2] == doctest::Approx(0.8));
  CHECK(r.macro_f1 == doctest::Approx(0.4889).epsilon(1e-4));
  CHECK(r.confusion[0][2] == 1);
  CHECK_THROWS_AS((void)evaluate(pred, all), InputError);
}

TEST_CASE("evaluation matches a confusion-matrix oracle and ignores order") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + below(rng, 40);
    std::vector<Label> g(n), p(n);
    std::size_t cm[3][3] = {};
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = static_cast<Label>(below(rng, 3));
      p[i] = static_cast<Label>(below(rng, 3));
      ++cm[std::size_t(g[i])][std::size_t(p[i])];
    }
    double mf1 = 0;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      std::size_t tp = cm[c][c], pc = 0, gc = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        pc += cm[k][c];
        gc += cm[c][k];
      }
      correct += tp;
      mf1 += (pc + gc) ? 2.0 * double(tp) / double(pc + gc) : 0.0;
    }
    const auto r = evaluate(p, g);
    CHECK(r.macro_f1 == doctest::Approx(mf1 / 3));
    CHECK(r.accuracy == doctest::Approx(double(correct) / double(n)));
    for (std::size_t c = 0; c < 3; ++c) {
      std::size_t row = 0, gold_count = 0;
      for (std::size_t k = 0; k < 3; ++k) row += r.confusion[c][k];
      for (auto x : g) gold_count += std::size_t(x) == c;
      CHECK(row == gold_count);
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle_range(idx.begin(), idx.end(), rng);
    std::vector<Label> g2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      g2[i] = g[idx[i]];
      p2[i] = p[idx[i]];
    }
    const auto r2 = evaluate(p2, g2);
    CHECK(r2.macro_f1 == r.macro_f1);
    CHECK(r2.confusion == r.confusion);
  }
}

TEST_CASE("paired t-test") {
  // Per-seed MF1 deltas 5.86, 6.55, 7.16 against a zero baseline.
  const std::vector<double> a{5.86, 6.55, 7.16}, zero{0, 0, 0};
  auto r = paired_t_test(a, zero);
  CHECK(r.t == doctest::Approx(17.38).epsilon(0.02 / 17.38));
  CHECK(std::abs(r.p - 0.0033) <= 0.0003);
  CHECK(r.df == 2);
  CHECK(r.significant);
  const auto s = paired_t_test(zero, a);
  CHECK(s.t == doctest::Approx(-r.t));
  CHECK(s.mean_diff == doctest::Approx(-r.mean_diff));
  CHECK(s.p == doctest::Approx(r.p));
  r = paired_t_test(a, a);
  CHECK(r.degenerate);
  CHECK(r.mean_diff == 0.0);
  const std::vector<double> shifted{6.86, 7.55, 8.16};
  r = paired_t_test(shifted, a);
  CHECK(r.degenerate);
  CHECK(std::isinf(r.t));
  CHECK(r.p == 0.0);
  CHECK_THROWS_AS((void)paired_t_test(std::vector<double>{1}, std::vector<double>{2}), InputError);
  CHECK_THROWS_AS((void)paired_t_test(a, std::vector<double>{1, 2}), InputError);
}

}  // TEST_SUITE
