// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/dora.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dabs/checkpoint.hpp"
#include "dabs/error.hpp"

namespace dabs {

std::string_view layer_order_name(LayerOrder order) {
  switch (order) {
    case LayerOrder::kNormal: return "normal";
    case LayerOrder::kReversed: return "reversed";
    case LayerOrder::kShuffled: return "shuffled";
  }
  return "normal";
}

LayerOrder parse_layer_order(std::string_view name) {
  if (name == "normal") return LayerOrder::kNormal;
  if (name == "reversed") return LayerOrder::kReversed;
  if (name == "shuffled") return LayerOrder::kShuffled;
  throw ConfigError("unknown layer order: " + std::string(name));
}

std::vector<std::size_t> layer_order_permutation(LayerOrder order, std::size_t k,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  switch (order) {
    case LayerOrder::kNormal:
      break;
    case LayerOrder::kReversed:
      std::reverse(perm.begin(), perm.end());
      break;
    case LayerOrder::kShuffled: {
      Rng rng(seed);
      shuffle_range(perm.begin(), perm.end(), rng);
      break;
    }
  }
  return perm;
}

void DoraConfig::validate(std::size_t encoder_layers) const {
  if (k == 0 || k > encoder_layers)
    throw ConfigError("dora: depth budget K = " + std::to_string(k) +
                      " must lie in [1, L = " + std::to_string(encoder_layers) + "]");
  if (kernel_sizes.empty()) throw ConfigError("dora: no kernel sizes");
  for (auto ks : kernel_sizes)
    if (ks % 2 == 0) throw ConfigError("dora: kernel size " + std::to_string(ks) + " is even");
  if (!std::isfinite(beta_init)) throw ConfigError("dora: beta_init must be finite");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dora: dropout must lie in [0, 1)");
}

template <typename T>
Dora<T>::Dora(const DoraConfig& cfg, std::size_t d, std::size_t encoder_layers,
              ParameterSet<T>& params, Rng& init_rng)
    : cfg_(cfg) {
  cfg_.validate(encoder_layers);
  for (auto ks : cfg_.kernel_sizes)
    conv_kernels_.push_back(params.create("dora.lcp.conv" + std::to_string(ks), {ks, d},
                                          Init::normal(1.0 / std::sqrt(double(ks))),
                                          init_rng));
  proj_ = params.create("dora.lcp.proj", {cfg_.kernel_sizes.size() * d, d},
                        Init::xavier(), init_rng);
  lcp_norm_ = LayerNormAffine<T>::create(params, "dora.lcp.norm", d, init_rng);
  gru_ = GruParams<T>::create(params, "dora.gru", d, d, init_rng);
  beta_ = params.create("dora.beta", {1}, Init::constant(cfg_.beta_init), init_rng);
  for (std::size_t u = 0; u < cfg_.k; ++u)
    level_norms_.push_back(LayerNormAffine<T>::create(
        params, "dora.level" + std::to_string(u + 1) + ".norm", d, init_rng));
  perm_ = layer_order_permutation(cfg_.layer_order, cfg_.k, cfg_.shuffle_seed);
}

template <typename T>
Tensor<T> Dora<T>::lcp_refine(const Tensor<T>& last_layer, ForwardContext& ctx) const {
  std::vector<Tensor<T>> branches;
  branches.reserve(conv_kernels_.size());
  for (const auto& kernel : conv_kernels_)
    branches.push_back(depthwise_conv1d(last_layer, kernel));
  Tensor<T> mixed = matmul(concat_cols(branches), proj_);
  mixed = maybe_dropout(mixed, cfg_.dropout, ctx);
  return lcp_norm_(add(mixed, last_layer));
}

template <typename T>
std::vector<Tensor<T>> Dora<T>::depth_gru(const HiddenStack<T>& stack,
                                          ForwardContext& ctx) const {
  (void)ctx;
  const std::size_t layers = stack.layers();
  if (cfg_.k > layers)
    throw ConfigError("dora: K = " + std::to_string(cfg_.k) + " exceeds L = " +
                      std::to_string(layers));
  const std::size_t first = layers - cfg_.k;
  std::vector<Tensor<T>> inputs;
  inputs.reserve(cfg_.k);
  for (std::size_t u = 0; u < cfg_.k; ++u) inputs.push_back(stack.states[first + perm_[u]]);

  std::vector<Tensor<T>> levels;
  levels.reserve(cfg_.k);
  if (!cfg_.use_depth_gru) {
    for (std::size_t u = 0; u < cfg_.k; ++u) levels.push_back(level_norms_[u](inputs[u]));
    return levels;
  }
  Tensor<T> state = inputs[0];
  levels.push_back(level_norms_[0](add(mul_scalar(state, beta_), inputs[0])));
  for (std::size_t u = 1; u < cfg_.k; ++u) {
    state = gru_cell(inputs[u], state, gru_);
    levels.push_back(level_norms_[u](add(state, inputs[u])));
  }
  return levels;
}

template <typename T>
DepthSubstrate<T> Dora<T>::build_substrate(const HiddenStack<T>& stack,
                                           ForwardContext& ctx) const {
  if (stack.layers() == 0) throw InputError("dora: empty hidden stack");
  DepthSubstrate<T> s;
  const Tensor<T>& last = stack.states.back();
  s.enhanced = cfg_.use_lcp ? lcp_refine(last, ctx) : last;
  s.levels = depth_gru(stack, ctx);
  return s;
}

template <typename T>
void save_substrate(const DepthSubstrate<T>& s, LayerOrder order, const std::string& path) {
  io::Container c;
  c.kind = io::FileKind::kSubstrate;
  c.header = {s.enhanced.rows(), s.enhanced.cols(), s.depth()};
  c.flag = static_cast<std::uint8_t>(order);
  c.records.push_back(io::to_record("E", s.enhanced));
  for (std::size_t u = 0; u < s.depth(); ++u)
    c.records.push_back(io::to_record("level." + std::to_string(u + 1), s.levels[u]));
  io::write_container(path, c);
}

template <typename T>
DepthSubstrate<T> load_substrate(const std::string& path, LayerOrder* order) {
  const io::Container c = io::read_container(path);
  if (c.kind != io::FileKind::kSubstrate)
    throw FormatError("not a substrate file: " + path, 5);
  if (c.flag > 2) throw FormatError("unknown layer-order flag", c.records_offset - 1);
  const std::uint64_t n = c.header[0], d = c.header[1], k = c.header[2];
  if (c.records.size() != k + 1)
    throw FormatError("substrate header announces K = " + std::to_string(k) +
                          " but file holds " + std::to_string(c.records.size()) +
                          " records",
                      c.records_offset);
  DepthSubstrate<T> s;
  for (const auto& rec : c.records) {
    if (rec.shape != Shape{n, d})
      throw FormatError("substrate record " + rec.name + " has shape " +
                            shape_str(rec.shape),
                        rec.offset);
  }
  s.enhanced = io::from_record<T>(c.records[0]);
  for (std::size_t u = 1; u < c.records.size(); ++u)
    s.levels.push_back(io::from_record<T>(c.records[u]));
  if (order) *order = static_cast<LayerOrder>(c.flag);
  return s;
}

template class Dora<float>;
template class Dora<double>;
template void save_substrate(const DepthSubstrate<float>&, LayerOrder, const std::string&);
template void save_substrate(const DepthSubstrate<double>&, LayerOrder, const std::string&);
template DepthSubstrate<float> load_substrate<float>(const std::string&, LayerOrder*);
template DepthSubstrate<double> load_substrate<double>(const std::string&, LayerOrder*);

}  // namespace dabs
