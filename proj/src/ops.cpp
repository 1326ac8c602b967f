// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dabs/error.hpp"
#include "dabs/simd.hpp"

namespace dabs {
namespace {

using detail::Node;

template <typename T>
Node<T>& parent(Node<T>& out, std::size_t i) {
  return *out.parents[i];
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
}

template <typename T>
void require_single(const Tensor<T>& s, const char* op) {
  if (s.numel() != 1)
    throw DimensionError(std::string(op) + ": expected one-element tensor, got " +
                         shape_str(s.shape()));
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D dfdx) {
  const auto xs = x.data();
  std::vector<T> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) y[i] = f(xs[i]);
  return record_op<T>(x.shape(), std::move(y), {x}, [dfdx](Node<T>& out) {
    Node<T>& in = parent(out, 0);
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += out.grad[i] * dfdx(in.value[i], out.value[i]);
  });
}

template <typename T>
void accumulate(Node<T>& n, const std::vector<T>& g, T factor = T(1)) {
  if (!n.requires_grad) return;
  auto& dst = n.ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() != 2)
    throw DimensionError("matmul: expected [m x k] (or [k]) times [k x p], got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  std::vector<T> c(m * p, T(0));
  simd::active_kernels<T>().gemm_nn(m, k, p, a.data().data(), b.data().data(),
                                    c.data());
  Shape shape = a.rank() == 1 ? Shape{p} : Shape{m, p};
  return record_op<T>(std::move(shape), std::move(c), {a, b},
                      [m, k, p](Node<T>& out) {
                        const auto& kt = simd::active_kernels<T>();
                        Node<T>& na = parent(out, 0);
                        Node<T>& nb = parent(out, 1);
                        if (na.requires_grad)
                          kt.gemm_nt(m, p, k, out.grad.data(), nb.value.data(),
                                     na.ensure_grad().data());
                        if (nb.requires_grad)
                          kt.gemm_tn(m, k, p, na.value.data(), out.grad.data(),
                                     nb.ensure_grad().data());
                      });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw DimensionError("matmul_nt: expected [m x k] and [p x k], got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), p = b.rows();
  std::vector<T> c(m * p, T(0));
  simd::active_kernels<T>().gemm_nt(m, k, p, a.data().data(), b.data().data(),
                                    c.data());
  return record_op<T>(Shape{m, p}, std::move(c), {a, b}, [m, k, p](Node<T>& out) {
    const auto& kt = simd::active_kernels<T>();
    Node<T>& na = parent(out, 0);
    Node<T>& nb = parent(out, 1);
    if (na.requires_grad)
      kt.gemm_nn(m, p, k, out.grad.data(), nb.value.data(), na.ensure_grad().data());
    if (nb.requires_grad)
      kt.gemm_tn(m, p, k, out.grad.data(), na.value.data(), nb.ensure_grad().data());
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> y(a.data().begin(), a.data().end());
  const auto bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bs[i];
  return record_op<T>(a.shape(), std::move(y), {a, b}, [](Node<T>& out) {
    accumulate(parent(out, 0), out.grad);
    accumulate(parent(out, 1), out.grad);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> y(a.data().begin(), a.data().end());
  const auto bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bs[i];
  return record_op<T>(a.shape(), std::move(y), {a, b}, [](Node<T>& out) {
    accumulate(parent(out, 0), out.grad);
    accumulate(parent(out, 1), out.grad, T(-1));
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> y(a.numel());
  const auto as = a.data();
  const auto bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = as[i] * bs[i];
  return record_op<T>(a.shape(), std::move(y), {a, b}, [](Node<T>& out) {
    Node<T>& na = parent(out, 0);
    Node<T>& nb = parent(out, 1);
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * na.value[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t d = x.cols(), n = x.rows();
  if (bias.numel() != d)
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match last axis of " + shape_str(x.shape()));
  std::vector<T> y(x.data().begin(), x.data().end());
  const auto bs = bias.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) y[r * d + c] += bs[c];
  return record_op<T>(x.shape(), std::move(y), {x, bias}, [n, d](Node<T>& out) {
    accumulate(parent(out, 0), out.grad);
    Node<T>& nb = parent(out, 1);
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) g[c] += out.grad[r * d + c];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> y(x.data().begin(), x.data().end());
  for (auto& v : y) v *= factor;
  return record_op<T>(x.shape(), std::move(y), {x}, [factor](Node<T>& out) {
    accumulate(parent(out, 0), out.grad, factor);
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  std::vector<T> y(x.data().begin(), x.data().end());
  for (auto& v : y) v += value;
  return record_op<T>(x.shape(), std::move(y), {x}, [](Node<T>& out) {
    accumulate(parent(out, 0), out.grad);
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  require_single(s, "mul_scalar");
  const T sv = s.data()[0];
  std::vector<T> y(x.data().begin(), x.data().end());
  for (auto& v : y) v *= sv;
  return record_op<T>(x.shape(), std::move(y), {x, s}, [](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    Node<T>& ns = parent(out, 1);
    const T sv = ns.value[0];
    accumulate(nx, out.grad, sv);
    if (ns.requires_grad) {
      T acc = 0;
      for (std::size_t i = 0; i < out.grad.size(); ++i) acc += out.grad[i] * nx.value[i];
      ns.ensure_grad()[0] += acc;
    }
  });
}

template <typename T>
Tensor<T> div_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  require_single(s, "div_scalar");
  const T sv = s.data()[0];
  std::vector<T> y(x.data().begin(), x.data().end());
  for (auto& v : y) v /= sv;
  return record_op<T>(x.shape(), std::move(y), {x, s}, [](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    Node<T>& ns = parent(out, 1);
    const T sv = ns.value[0];
    accumulate(nx, out.grad, T(1) / sv);
    if (ns.requires_grad) {
      // d(x/s)/ds = -y/s
      T acc = 0;
      for (std::size_t i = 0; i < out.grad.size(); ++i) acc += out.grad[i] * out.value[i];
      ns.ensure_grad()[0] -= acc / sv;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return record_op<T>(Shape{}, {acc}, {x}, [](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (auto& v : g) v += out.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  return record_op<T>(Shape{}, {acc * inv}, {x}, [inv](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (auto& v : g) v += out.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<T> y(d, T(0));
  const auto xs = x.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) y[c] += xs[r * d + c];
  const T inv = T(1) / static_cast<T>(n);
  for (auto& v : y) v *= inv;
  return record_op<T>(Shape{d}, std::move(y), {x}, [n, d, inv](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) g[r * d + c] += out.grad[c] * inv;
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps) {
  const std::size_t d = x.cols(), n = x.rows();
  if (gain.numel() != d || bias.numel() != d)
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " vs input " +
                         shape_str(x.shape()));
  const auto xs = x.data();
  const auto gs = gain.data();
  const auto bs = bias.data();
  std::vector<T> xhat(n * d), inv_std(n), y(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = xs.data() + r * d;
    T mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (row[c] - mu) * is;
      xhat[r * d + c] = h;
      y[r * d + c] = gs[c] * h + bs[c];
    }
  }
  return record_op<T>(
      x.shape(), std::move(y), {x, gain, bias},
      [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& out) {
        Node<T>& nx = parent(out, 0);
        Node<T>& ng = parent(out, 1);
        Node<T>& nb = parent(out, 2);
        if (ng.requires_grad) {
          auto& g = ng.ensure_grad();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c)
              g[c] += out.grad[r * d + c] * xhat[r * d + c];
        }
        if (nb.requires_grad) {
          auto& g = nb.ensure_grad();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) g[c] += out.grad[r * d + c];
        }
        if (nx.requires_grad) {
          auto& g = nx.ensure_grad();
          std::vector<T> dxhat(d);
          for (std::size_t r = 0; r < n; ++r) {
            T m1 = 0, m2 = 0;
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = out.grad[r * d + c] * ng.value[c];
              m1 += dxhat[c];
              m2 += dxhat[c] * xhat[r * d + c];
            }
            m1 /= static_cast<T>(d);
            m2 /= static_cast<T>(d);
            for (std::size_t c = 0; c < d; ++c)
              g[r * d + c] += inv_std[r] * (dxhat[c] - m1 - xhat[r * d + c] * m2);
          }
        }
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, T temperature) {
  if (!(temperature > T(0)))
    throw DomainError("softmax: temperature must be positive, got " +
                      std::to_string(static_cast<double>(temperature)));
  const std::size_t k = x.cols(), n = x.rows();
  const auto xs = x.data();
  std::vector<T> y(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = xs.data() + r * k;
    const T mx = *std::max_element(row, row + k);
    T z = 0;
    for (std::size_t c = 0; c < k; ++c) {
      y[r * k + c] = std::exp((row[c] - mx) / temperature);
      z += y[r * k + c];
    }
    for (std::size_t c = 0; c < k; ++c) y[r * k + c] /= z;
  }
  return record_op<T>(x.shape(), std::move(y), {x}, [n, k, temperature](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (std::size_t r = 0; r < n; ++r) {
      T dotp = 0;
      for (std::size_t c = 0; c < k; ++c) dotp += out.grad[r * k + c] * out.value[r * k + c];
      for (std::size_t c = 0; c < k; ++c)
        g[r * k + c] += out.value[r * k + c] * (out.grad[r * k + c] - dotp) / temperature;
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); },
               [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  return unary(
      x,
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v))); },
      [](T v, T) {
        const T th = std::tanh(kC * (v + kA * v * v * v));
        return T(0.5) * (T(1) + th) +
               T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != n)
      throw DimensionError("concat_cols: row count mismatch " +
                           shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<T> y(n * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    const auto ps = p.data();
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(ps.data() + r * w, w, y.data() + r * total + off);
    off += w;
  }
  Shape shape = parts[0].rank() <= 1 ? Shape{total} : Shape{n, total};
  return record_op<T>(std::move(shape), std::move(y), parts,
                      [n, total, widths](Node<T>& out) {
                        std::size_t off = 0;
                        for (std::size_t i = 0; i < widths.size(); ++i) {
                          Node<T>& np = parent(out, i);
                          const std::size_t w = widths[i];
                          if (np.requires_grad) {
                            auto& g = np.ensure_grad();
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t c = 0; c < w; ++c)
                                g[r * w + c] += out.grad[r * total + off + c];
                          }
                          off += w;
                        }
                      });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t d = parts[0].cols();
  std::size_t rows = 0;
  std::vector<T> y;
  for (const auto& p : parts) {
    if (p.cols() != d)
      throw DimensionError("concat_rows: width mismatch " +
                           shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    rows += p.rows();
    y.insert(y.end(), p.data().begin(), p.data().end());
  }
  return record_op<T>(Shape{rows, d}, std::move(y), parts, [](Node<T>& out) {
    std::size_t off = 0;
    for (auto& pp : out.parents) {
      const std::size_t len = pp->value.size();
      if (pp->requires_grad) {
        auto& g = pp->ensure_grad();
        for (std::size_t i = 0; i < len; ++i) g[i] += out.grad[off + i];
      }
      off += len;
    }
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.rows(), d = x.cols();
  if (begin >= end || end > n)
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  std::vector<T> y(x.data().begin() + begin * d, x.data().begin() + end * d);
  return record_op<T>(Shape{end - begin, d}, std::move(y), {x}, [begin, d](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i) g[begin * d + i] += out.grad[i];
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.rows(), d = x.cols();
  if (begin >= end || end > d)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  std::vector<T> y(n * w);
  const auto xs = x.data();
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(xs.data() + r * d + begin, w, y.data() + r * w);
  Shape shape = x.rank() <= 1 ? Shape{w} : Shape{n, w};
  return record_op<T>(std::move(shape), std::move(y), {x}, [n, d, w, begin](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) g[r * d + begin + c] += out.grad[r * w + c];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  std::vector<T> y(x.data().begin(), x.data().end());
  return record_op<T>(std::move(shape), std::move(y), {x}, [](Node<T>& out) {
    accumulate(parent(out, 0), out.grad);
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids) {
  if (table.rank() != 2) throw DimensionError("gather_rows: table must be rank 2");
  const std::size_t v = table.rows(), d = table.cols(), n = ids.size();
  if (n == 0) throw InputError("gather_rows: empty id list");
  std::vector<T> y(n * d);
  const auto ts = table.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw InputError("gather_rows: id " + std::to_string(ids[i]) +
                       " outside table of " + std::to_string(v) + " rows");
    std::copy_n(ts.data() + static_cast<std::size_t>(ids[i]) * d, d, y.data() + i * d);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return record_op<T>(Shape{n, d}, std::move(y), {table}, [idv, d](Node<T>& out) {
    Node<T>& nt = parent(out, 0);
    if (!nt.requires_grad) return;
    auto& g = nt.ensure_grad();
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t c = 0; c < d; ++c)
        g[static_cast<std::size_t>(idv[i]) * d + c] += out.grad[i * d + c];
  });
}

template <typename T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel) {
  if (x.rank() != 2 || kernel.rank() != 2 || kernel.cols() != x.cols())
    throw DimensionError("depthwise_conv1d: expected x[n x d], kernel[k x d], got " +
                         shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
  const std::size_t n = x.rows(), d = x.cols(), k = kernel.rows();
  if (k % 2 == 0)
    throw DomainError("depthwise_conv1d: kernel size must be odd, got " +
                      std::to_string(k));
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const auto xs = x.data();
  const auto ks = kernel.data();
  std::vector<T> y(n * d, T(0));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      for (std::size_t c = 0; c < d; ++c)
        y[t * d + c] += ks[j * d + c] * xs[static_cast<std::size_t>(src) * d + c];
    }
  return record_op<T>(x.shape(), std::move(y), {x, kernel}, [n, d, k, half](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    Node<T>& nk = parent(out, 1);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const std::size_t s = static_cast<std::size_t>(src);
        if (nx.requires_grad) {
          auto& g = nx.ensure_grad();
          for (std::size_t c = 0; c < d; ++c)
            g[s * d + c] += nk.value[j * d + c] * out.grad[t * d + c];
        }
        if (nk.requires_grad) {
          auto& g = nk.ensure_grad();
          for (std::size_t c = 0; c < d; ++c)
            g[j * d + c] += nx.value[s * d + c] * out.grad[t * d + c];
        }
      }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T p, std::mt19937_64& rng, bool training) {
  if (p < T(0) || p >= T(1))
    throw DomainError("dropout: rate must lie in [0, 1), got " +
                      std::to_string(static_cast<double>(p)));
  if (!training || p == T(0)) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T s = T(1) / (T(1) - p);
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? s : T(0);
  std::vector<T> y(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xs[i] * mask[i];
  return record_op<T>(x.shape(), std::move(y), {x}, [mask = std::move(mask)](Node<T>& out) {
    Node<T>& nx = parent(out, 0);
    if (!nx.requires_grad) return;
    auto& g = nx.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * mask[i];
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t gold) {
  const std::size_t k = logits.numel();
  if (logits.rows() != 1)
    throw DimensionError("cross_entropy: expected a logit vector, got " +
                         shape_str(logits.shape()));
  if (gold >= k)
    throw InputError("cross_entropy: label " + std::to_string(gold) +
                     " outside " + std::to_string(k) + " classes");
  const auto zs = logits.data();
  const T mx = *std::max_element(zs.begin(), zs.end());
  std::vector<T> probs(k);
  T z = 0;
  for (std::size_t c = 0; c < k; ++c) {
    probs[c] = std::exp(zs[c] - mx);
    z += probs[c];
  }
  for (auto& p : probs) p /= z;
  const T loss = std::log(z) + mx - zs[gold];
  return record_op<T>(Shape{}, {loss}, {logits},
                      [probs = std::move(probs), gold](Node<T>& out) {
                        Node<T>& nz = parent(out, 0);
                        if (!nz.requires_grad) return;
                        auto& g = nz.ensure_grad();
                        for (std::size_t c = 0; c < g.size(); ++c)
                          g[c] += out.grad[0] * (probs[c] - (c == gold ? T(1) : T(0)));
                      });
}

#define DABS_INSTANTIATE_OPS(T)                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> scale(const Tensor<T>&, T);                                  \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> div_scalar(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sum(const Tensor<T>&);                                       \
  template Tensor<T> mean(const Tensor<T>&);                                      \
  template Tensor<T> mean_rows(const Tensor<T>&);                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,               \
                                const Tensor<T>&, T);                             \
  template Tensor<T> softmax(const Tensor<T>&, T);                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                      \
  template Tensor<T> gelu(const Tensor<T>&);                                      \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                  \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                  \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);      \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                            \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const int>);         \
  template Tensor<T> depthwise_conv1d(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> dropout(const Tensor<T>&, T, std::mt19937_64&, bool);        \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::size_t);

DABS_INSTANTIATE_OPS(float)
DABS_INSTANTIATE_OPS(double)

}  // namespace dabs
