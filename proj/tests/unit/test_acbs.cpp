#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dabs/acbs.hpp"
#include "dabs/error.hpp"
#include "dabs/model.hpp"
#include "dabs/objectives.hpp"
#include "testing.hpp"

using namespace dabs;
using dabs::testing::is_probability;
using dabs::testing::uniform_tensor;
using D = Tensor<double>;

namespace {

ModelConfig toy_config(std::size_t d = 8, std::size_t layers = 4, std::size_t k = 3) {
  ModelConfig c;
  c.encoder.vocab_size = 12;
  c.encoder.d = d;
  c.encoder.layers = layers;
  c.encoder.heads = 2;
  c.encoder.ffn_mult = 2;
  c.encoder.max_len = 16;
  c.encoder.dropout = 0.0;
  c.dora.k = k;
  c.dora.dropout = 0.0;
  c.acbs.heads = 2;
  c.acbs.dropout = 0.0;
  c.acbs.classifier_dropout = 0.0;
  return c;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-10) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

std::vector<double> mlp_oracle(const Mlp<double>& m, const std::vector<double>& x) {
  const std::size_t in = m.first.weight.dim(0), hid = m.first.weight.dim(1), out = m.second.weight.dim(1);
  std::vector<double> h(hid), y(out);
  for (std::size_t j = 0; j < hid; ++j) {
    double s = m.first.bias[j];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * m.first.weight.at(i, j);
    h[j] = 0.5 * s * (1 + std::tanh(std::sqrt(2 / M_PI) * (s + 0.044715 * s * s * s)));
  }
  for (std::size_t j = 0; j < out; ++j) {
    double s = m.second.bias[j];
    for (std::size_t i = 0; i < hid; ++i) s += h[i] * m.second.weight.at(i, j);
    y[j] = s;
  }
  return y;
}

std::vector<double> softmax_oracle(const std::vector<double>& z, double tau = 1.0) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> p(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp((z[i] - mx) / tau));
  for (auto& v : p) v /= s;
  return p;
}

std::vector<double> ln_oracle(const std::vector<double>& x, const LayerNormAffine<double>& ln) {
  double mu = 0, var = 0;
  for (double v : x) mu += v;
  mu /= double(x.size());
  for (double v : x) var += (v - mu) * (v - mu);
  var /= double(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * ln.gain[i] + ln.bias[i];
  return y;
}

std::vector<double> row(const D& m, std::size_t r) {
  return {m.data().begin() + r * m.cols(), m.data().begin() + (r + 1) * m.cols()};
}

}  // namespace

TEST_SUITE("acbs") {

TEST_CASE("aspect_vector examples") {
  const D e = D::from({3, 2}, {1, 0, 0, 1, 4, 4});
  CHECK(aspect_vector(e, AspectQuery{2, 2}).to_vector() == std::vector<double>{0, 1});
  check_close(aspect_vector(e, AspectQuery{1, 2}).to_vector(), {0.5, 0.5});
  const D same = D::from({3, 2}, {7, 8, 7, 8, 7, 8});
  check_close(aspect_vector(same, AspectQuery{1, 3}).to_vector(), {7, 8});
  CHECK_THROWS_AS((void)aspect_vector(e, AspectQuery{0, 1}), InputError);
  CHECK_THROWS_AS((void)aspect_vector(e, AspectQuery{2, 4}), InputError);
  CHECK_THROWS_AS((void)aspect_vector(e, AspectQuery{3, 2}), InputError);
}

TEST_CASE("pool_tokens examples") {
  const double eps = 1e-6;
  const D c = D::from({2, 2}, {1, 0, 0, 1});
  auto p = pool_tokens(c, D::from({2}, {1, 1}), eps).to_vector();
  CHECK(std::abs(p[0] - 0.5) <= 2 * eps);
  CHECK(std::abs(p[1] - 0.5) <= 2 * eps);
  p = pool_tokens(c, D::from({2}, {1, 0}), eps).to_vector();
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + eps)).epsilon(1e-15));
  CHECK(p[1] == 0.0);
  p = pool_tokens(c, D::from({2}, {0.5, 0.25}), eps).to_vector();
  CHECK(std::abs(p[0] - 2.0 / 3) < 1e-3);
  CHECK(std::abs(p[1] - 1.0 / 3) < 1e-3);
}

TEST_CASE("pool_depth examples") {
  const D means = D::from({2, 2}, {3, 0, 0, 6});
  check_close(pool_depth(D::from({2}, {2.0 / 3, 1.0 / 3}), means).to_vector(), {2, 2});
  check_close(pool_depth(D::from({2}, {0, 1}), means).to_vector(), {0, 6});
}

TEST_CASE("fuse examples") {
  const D c = D::from({2}, {1, 2}), d = D::from({2}, {3, -4}), a = D::from({2}, {5, 0});
  check_close(fuse(D::full({3}, 1.0 / 3), c, d, a).to_vector(), {3, -2.0 / 3});
  check_close(fuse(D::from({3}, {0, 0, 1}), c, d, a).to_vector(), {5, 0});
  check_close(fuse(D::from({3}, {0.5, 0.25, 0.25}), c, d, a).to_vector(), {0.5 + 0.75 + 1.25, 1 - 1});
}

TEST_CASE("selectors, classifier and temperatures") {
  Rng rng(1);
  ParameterSet<double> ps;
  AcbsConfig cfg;
  cfg.heads = 2;
  cfg.dropout = cfg.classifier_dropout = 0.0;
  Acbs<double> acbs(cfg, 4, 3, ps, rng);
  ForwardContext ctx;
  D means = uniform_tensor({3, 4}, rng), a = uniform_tensor({4}, rng), cm = uniform_tensor({4}, rng);

  for (const char* n : {"acbs.depth.1.weight", "acbs.depth.1.bias"})
    for (auto& v : ps.get(n).mutable_data()) v = 0.0;
  auto [alpha, depth] = acbs.depth_select(means, a, cm, ctx);
  for (double v : alpha.to_vector()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  for (const char* n : {"acbs.classifier.weight", "acbs.classifier.bias"})
    for (auto& v : ps.get(n).mutable_data()) v = 0.0;
  const auto logits = acbs.classify(uniform_tensor({4}, rng), ctx);
  for (double p : softmax(logits).to_vector()) CHECK(p == doctest::Approx(1.0 / 3));
  const auto p = softmax(D::from({3}, {2, 0, 0})).to_vector();
  const double e2 = std::exp(2.0);
  CHECK(p[0] == doctest::Approx(e2 / (e2 + 2)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1 / (e2 + 2)).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(1 / (e2 + 2)).epsilon(1e-12));
}

TEST_CASE("read_aspect matches a step-by-step oracle") {
  Rng rng(2);
  DabsModel<double> model(toy_config(), 7);
  const std::vector<int> toks{2, 3, 4, 5, 6, 7};
  ForwardContext ctx;
  const auto state = model.prepare(toks, ctx);
  const AspectQuery q{2, 3};
  const auto r = model.read(state, q, ctx);
  const auto& acbs = model.acbs();
  const auto& view = state.view;
  const std::size_t n = 6, d = 8, k = 3;

  std::vector<double> a(d, 0.0);
  for (std::size_t t = 1; t <= 2; ++t)
    for (std::size_t c = 0; c < d; ++c) a[c] += view.substrate.enhanced.at(t, c) / 2.0;
  check_close(r.aspect.to_vector(), a);

  std::vector<double> w(n), pooled(d, 0.0);
  double wsum = 0;
  for (std::size_t t = 0; t < n; ++t) {
    auto in = row(view.context, t);
    in.insert(in.end(), a.begin(), a.end());
    w[t] = 1.0 / (1.0 + std::exp(-mlp_oracle(acbs.token_mlp(), in)[0]));
    wsum += w[t];
    for (std::size_t c = 0; c < d; ++c) pooled[c] += w[t] * view.context.at(t, c);
  }
  for (auto& v : pooled) v /= wsum + 1e-6;
  check_close(r.w.to_vector(), w);
  check_close(r.pooled.to_vector(), pooled);

  std::vector<double> in = a;
  std::vector<double> cmean(d, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c) cmean[c] += view.context.at(t, c) / double(n);
  in.insert(in.end(), cmean.begin(), cmean.end());
  const auto alpha = softmax_oracle(mlp_oracle(acbs.depth_mlp(), in));
  check_close(r.alpha.to_vector(), alpha);
  std::vector<double> depth(d, 0.0);
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < d; ++c)
        depth[c] += alpha[u] * view.substrate.levels[u].at(t, c) / double(n);
  check_close(r.depth.to_vector(), depth);

  ParameterSet<double>& ps = const_cast<DabsModel<double>&>(model).params();
  auto ln = [&](const char* name) {
    LayerNormAffine<double> l;
    l.gain = ps.get(std::string(name) + ".gain");
    l.bias = ps.get(std::string(name) + ".bias");
    return l;
  };
  const auto ch = ln_oracle(pooled, ln("acbs.fusion.norm_c"));
  const auto dh = ln_oracle(depth, ln("acbs.fusion.norm_d"));
  const auto ah = ln_oracle(a, ln("acbs.fusion.norm_a"));
  std::vector<double> fin = ch;
  fin.insert(fin.end(), dh.begin(), dh.end());
  fin.insert(fin.end(), ah.begin(), ah.end());
  const auto g = softmax_oracle(mlp_oracle(acbs.fusion_mlp(), fin));
  check_close(r.g.to_vector(), g);
  std::vector<double> h(d);
  for (std::size_t c = 0; c < d; ++c) h[c] = g[0] * ch[c] + g[1] * dh[c] + g[2] * ah[c];
  check_close(r.h.to_vector(), h);
  std::vector<double> z(3);
  for (std::size_t j = 0; j < 3; ++j) {
    z[j] = acbs.classifier().bias[j];
    for (std::size_t c = 0; c < d; ++c) z[j] += h[c] * acbs.classifier().weight.at(c, j);
  }
  check_close(r.logits.to_vector(), z);
  check_close(r.probs.to_vector(), softmax_oracle(z));
}

TEST_CASE("ablation switches substitute uniform counterparts") {
  ModelConfig cfg = toy_config();
  cfg.acbs.use_token_sel = cfg.acbs.use_layer_sel = cfg.acbs.use_gated_fusion = false;
  DabsModel<double> model(cfg, 3);
  ForwardContext ctx;
  const std::vector<int> toks{2, 3, 4, 5, 6};
  const auto state = model.prepare(toks, ctx);
  const auto r = model.read(state, AspectQuery{1, 2}, ctx);
  for (double v : r.w.to_vector()) CHECK(v == 1.0);
  check_close(r.pooled.to_vector(), mean_rows(state.view.context).to_vector());
  for (double v : r.alpha.to_vector()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  for (double v : r.g.to_vector()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK_FALSE(r.learned_w);
  CHECK_FALSE(r.learned_g);
}

TEST_CASE("architectures resolve to their component switches") {
  ModelConfig c = toy_config();
  c.architecture = Architecture::kDoraOnly;
  auto r = c.resolved();
  CHECK_FALSE(r.acbs.use_token_sel);
  CHECK_FALSE(r.acbs.use_layer_sel);
  CHECK_FALSE(r.acbs.use_gated_fusion);
  CHECK(r.dora.use_lcp);
  c.architecture = Architecture::kAcbsOnly;
  r = c.resolved();
  CHECK_FALSE(r.dora.use_lcp);
  CHECK_FALSE(r.dora.use_depth_gru);
  CHECK(r.acbs.use_token_sel);
  CHECK(parse_architecture("encoder_only") == Architecture::kEncoderOnly);
  CHECK_THROWS_AS((void)parse_architecture("decoder"), ConfigError);

  c.architecture = Architecture::kEncoderOnly;
  DabsModel<double> enc(c, 1);
  CHECK_FALSE(enc.has_substrate());
  CHECK_FALSE(enc.params().contains("acbs.classifier.weight"));
  ForwardContext ctx;
  const auto out = enc.forward(std::vector<int>{2, 3, 4}, {AspectQuery{2, 2}}, ctx);
  CHECK(is_probability(dabs::testing::as_double(out[0].probs), 1e-12));
}

TEST_CASE("shared substrate equals per-aspect rebuilds and is order invariant") {
  DabsModel<float> model(toy_config(16, 4, 3), 11);
  Rng rng(5);
  ForwardContext ctx;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + below(rng, 8);
    std::vector<int> toks(n);
    for (auto& t : toks) t = static_cast<int>(below(rng, 12));
    std::vector<AspectQuery> qs;
    const std::size_t m = 1 + below(rng, 4);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t f = 1 + below(rng, n);
      qs.push_back({f, f + below(rng, n - f + 1)});
    }
    const auto shared = model.forward(toks, qs, ctx, true);
    const auto rebuilt = model.forward(toks, qs, ctx, false);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(shared[i].logits.to_vector() == rebuilt[i].logits.to_vector());
      CHECK(shared[i].alpha.to_vector() == rebuilt[i].alpha.to_vector());
      CHECK(shared[i].w.to_vector() == rebuilt[i].w.to_vector());
    }
    std::vector<AspectQuery> reversed(qs.rbegin(), qs.rend());
    const auto back = model.forward(toks, reversed, ctx, true);
    for (std::size_t i = 0; i < m; ++i)
      CHECK(back[m - 1 - i].logits.to_vector() == shared[i].logits.to_vector());
  }
}

TEST_CASE("alpha, g and class probabilities are probability vectors") {
  DabsModel<double> model(toy_config(), 13);
  Rng rng(6);
  ForwardContext ctx;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> toks(2 + below(rng, 10));
    for (auto& t : toks) t = static_cast<int>(below(rng, 12));
    const auto r = model.forward(toks, {AspectQuery{1, toks.size()}}, ctx)[0];
    CHECK(is_probability(r.alpha.to_vector(), 1e-6));
    CHECK(is_probability(r.g.to_vector(), 1e-6));
    CHECK(is_probability(r.probs.to_vector(), 1e-6));
    for (double w : r.w.to_vector()) CHECK((w >= 0.0 && w <= 1.0));
  }
}

TEST_CASE("low depth temperature concentrates alpha on the argmax") {
  DabsModel<double> model(toy_config(), 17);
  ForwardContext ctx;
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<int> toks(4 + below(rng, 6));
    for (auto& t : toks) t = static_cast<int>(below(rng, 12));
    model.mutable_acbs().mutable_config().tau_alpha = 1.0;
    const auto warm = model.forward(toks, {AspectQuery{1, 1}}, ctx)[0].alpha.to_vector();
    // logits differ from log(alpha) by a constant
    std::vector<double> z;
    for (double p : warm) z.push_back(std::log(p));
    auto sorted = z;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 0.1) continue;
    model.mutable_acbs().mutable_config().tau_alpha = 0.01;
    const auto cold = model.forward(toks, {AspectQuery{1, 1}}, ctx)[0].alpha.to_vector();
    const auto best = std::max_element(z.begin(), z.end()) - z.begin();
    CHECK(cold[static_cast<std::size_t>(best)] > 0.99);
    ++checked;
  }
  model.mutable_acbs().mutable_config().tau_alpha = 1.0;
  CHECK(checked > 10);
}

TEST_CASE("traces export one JSON object per aspect") {
  DabsModel<double> model(toy_config(), 19);
  ForwardContext ctx;
  const AspectQuery q{2, 3, Label::kNegative};
  const auto r = model.forward(std::vector<int>{2, 3, 4, 5}, {q}, ctx)[0];
  const auto tr = make_trace(r, q, "s-1");
  std::ostringstream out;
  write_trace_jsonl(out, tr);
  const auto j = nlohmann::json::parse(out.str());
  for (const char* key : {"sentence_id", "span", "w", "alpha", "g", "logits", "prediction", "gold"})
    CHECK(j.contains(key));
  CHECK(j["span"] == nlohmann::json::array({2, 3}));
  CHECK(j["gold"] == "negative");
  CHECK(j["w"].size() == 4);
  CHECK(j["alpha"].size() == 3);
  CHECK(out.str().find('\n') == out.str().size() - 1);
  CHECK(parse_label("Positive") == Label::kPositive);
  CHECK_THROWS_AS((void)parse_label("mixed"), InputError);
}

TEST_CASE("full-model loss gradient matches finite differences") {
  // d = 8, n = 6, K = 3, L = 4 in double precision.
  DabsModel<double> model(toy_config(8, 4, 3), 23);
  auto& ps = model.params();
  const std::vector<int> toks{2, 5, 7, 3, 9, 4};
  const std::vector<AspectQuery> qs{{2, 3, Label::kPositive}, {5, 5, Label::kNegative}};
  LossWeights lw{0.3, 0.3, 0.3, false};  // large enough to exercise every term
  ForwardContext ctx;
  std::vector<D> vars;
  for (auto& p : ps.items()) vars.push_back(p.tensor);
  const auto rep = dabs::testing::grad_check(
      vars, [&] { return total_loss(model.forward(toks, qs, ctx), qs, lw); }, 1e-3);
  CHECK(rep.failed == 0);
  CHECK(rep.checked == ps.scalar_count());
  MESSAGE("parameters checked: " << rep.checked << ", worst relative error " << rep.worst);
}

}  // TEST_SUITE
