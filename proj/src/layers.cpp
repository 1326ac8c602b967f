// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/layers.hpp"

#include <cmath>

#include "dabs/error.hpp"

namespace dabs {

template <typename T>
Tensor<T> ParameterSet<T>::create(const std::string& name, Shape shape,
                                  Init init, Rng& rng) {
  if (contains(name)) throw InputError("duplicate parameter name: " + name);
  const std::size_t n = shape_numel(shape);
  std::vector<T> values(n, T(0));
  switch (init.kind) {
    case InitKind::kZeros:
      break;
    case InitKind::kOnes:
      for (auto& v : values) v = T(1);
      break;
    case InitKind::kConstant:
      for (auto& v : values) v = static_cast<T>(init.scale);
      break;
    case InitKind::kXavier: {
      const double fan_in = shape.size() >= 2 ? static_cast<double>(shape[0]) : 1.0;
      const double fan_out = static_cast<double>(shape.back());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : values) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
      break;
    }
    case InitKind::kNormal:
      for (auto& v : values) v = static_cast<T>(standard_normal(rng) * init.scale);
      break;
  }
  Tensor<T> t = Tensor<T>::leaf(std::move(shape), std::move(values));
  items_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> ParameterSet<T>::get(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return p.tensor;
  throw InputError("unknown parameter: " + name);
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return true;
  return false;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, double p, ForwardContext& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (ctx.rng == nullptr) throw DomainError("training forward pass without an RNG");
  return dropout(x, static_cast<T>(p), *ctx.rng, true);
}

template <typename T>
Linear<T> Linear<T>::create(ParameterSet<T>& ps, const std::string& name,
                            std::size_t in, std::size_t out, Rng& rng,
                            bool with_bias) {
  Linear l;
  l.weight = ps.create(name + ".weight", {in, out}, Init::xavier(), rng);
  if (with_bias) l.bias = ps.create(name + ".bias", {out}, Init::zeros(), rng);
  return l;
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> y = matmul(x, weight);
  return bias.defined() ? add_bias(y, bias) : y;
}

template <typename T>
Mlp<T> Mlp<T>::create(ParameterSet<T>& ps, const std::string& name,
                      std::size_t in, std::size_t hidden, std::size_t out,
                      double dropout, Rng& rng) {
  Mlp m;
  m.first = Linear<T>::create(ps, name + ".0", in, hidden, rng);
  m.second = Linear<T>::create(ps, name + ".1", hidden, out, rng);
  m.dropout = dropout;
  return m;
}

template <typename T>
Tensor<T> Mlp<T>::operator()(const Tensor<T>& x, ForwardContext& ctx) const {
  return second(maybe_dropout(gelu(first(x)), dropout, ctx));
}

template <typename T>
LayerNormAffine<T> LayerNormAffine<T>::create(ParameterSet<T>& ps,
                                              const std::string& name,
                                              std::size_t d, Rng& rng) {
  LayerNormAffine ln;
  ln.gain = ps.create(name + ".gain", {d}, Init::ones(), rng);
  ln.bias = ps.create(name + ".bias", {d}, Init::zeros(), rng);
  return ln;
}

template <typename T>
GruParams<T> GruParams<T>::create(ParameterSet<T>& ps, const std::string& name,
                                  std::size_t d_in, std::size_t d, Rng& rng) {
  GruParams g;
  g.w_z = ps.create(name + ".w_z", {d_in, d}, Init::xavier(), rng);
  g.w_r = ps.create(name + ".w_r", {d_in, d}, Init::xavier(), rng);
  g.w_n = ps.create(name + ".w_n", {d_in, d}, Init::xavier(), rng);
  g.u_z = ps.create(name + ".u_z", {d, d}, Init::xavier(), rng);
  g.u_r = ps.create(name + ".u_r", {d, d}, Init::xavier(), rng);
  g.u_n = ps.create(name + ".u_n", {d, d}, Init::xavier(), rng);
  g.b_z = ps.create(name + ".b_z", {d}, Init::zeros(), rng);
  g.b_r = ps.create(name + ".b_r", {d}, Init::zeros(), rng);
  g.b_n = ps.create(name + ".b_n", {d}, Init::zeros(), rng);
  return g;
}

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h, const GruParams<T>& p,
                   GruTrace<T>* trace) {
  if (x.rows() != h.rows())
    throw DimensionError("gru_cell: input rows " + shape_str(x.shape()) +
                         " vs state " + shape_str(h.shape()));
  if (x.cols() != p.w_z.dim(0) || h.cols() != p.u_z.dim(0) ||
      h.cols() != p.w_z.cols())
    throw DimensionError("gru_cell: parameter shapes " + shape_str(p.w_z.shape()) +
                         "/" + shape_str(p.u_z.shape()) + " do not fit x " +
                         shape_str(x.shape()) + ", h " + shape_str(h.shape()));
  Tensor<T> z = sigmoid(add_bias(add(matmul(x, p.w_z), matmul(h, p.u_z)), p.b_z));
  Tensor<T> r = sigmoid(add_bias(add(matmul(x, p.w_r), matmul(h, p.u_r)), p.b_r));
  Tensor<T> n = tanh(add_bias(add(matmul(x, p.w_n), mul(r, matmul(h, p.u_n))), p.b_n));
  if (trace) *trace = {z, r, n};
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return add(n, mul(z, sub(h, n)));
}

template <typename T>
MultiHeadAttention<T> MultiHeadAttention<T>::create(ParameterSet<T>& ps,
                                                    const std::string& name,
                                                    std::size_t d,
                                                    std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0)
    throw ConfigError("attention width " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  MultiHeadAttention m;
  m.query = Linear<T>::create(ps, name + ".q", d, d, rng);
  m.key = Linear<T>::create(ps, name + ".k", d, d, rng);
  m.value = Linear<T>::create(ps, name + ".v", d, d, rng);
  m.output = Linear<T>::create(ps, name + ".o", d, d, rng);
  m.heads = heads;
  return m;
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& x,
                                            std::vector<Tensor<T>>* weights) const {
  const std::size_t d = x.cols();
  const std::size_t dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  Tensor<T> q = query(x), k = key(x), v = value(x);
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> qh = heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    Tensor<T> kh = heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    Tensor<T> vh = heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
    Tensor<T> a = softmax(scale(matmul_nt(qh, kh), inv_sqrt));
    if (weights) weights->push_back(a);
    outs.push_back(matmul(a, vh));
  }
  Tensor<T> merged = heads == 1 ? outs[0] : concat_cols(outs);
  return output(merged);
}

#define DABS_INSTANTIATE_LAYERS(T)                                                 \
  template class ParameterSet<T>;                                                  \
  template struct Linear<T>;                                                       \
  template struct Mlp<T>;                                                          \
  template struct LayerNormAffine<T>;                                              \
  template struct GruParams<T>;                                                    \
  template struct MultiHeadAttention<T>;                                           \
  template Tensor<T> maybe_dropout(const Tensor<T>&, double, ForwardContext&);     \
  template Tensor<T> gru_cell(const Tensor<T>&, const Tensor<T>&,                  \
                              const GruParams<T>&, GruTrace<T>*);

DABS_INSTANTIATE_LAYERS(float)
DABS_INSTANTIATE_LAYERS(double)

}  // namespace dabs
