// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Operations build the
// graph as they run (when grad mode is on and an input requires grad);
// backward() walks it in reverse topological order and accumulates into
// every reachable node's grad. A graph and its tensors belong to a single
// thread; independent replicas may run concurrently.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dabs {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from(Shape shape, std::vector<T> values);
  static Tensor scalar(T value);
  /// Leaf tensor with requires_grad = true.
  static Tensor leaf(Shape shape, std::vector<T> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  /// Extent of the last axis (1 for scalars).
  std::size_t cols() const;
  /// Product of every extent but the last (1 for vectors and scalars).
  std::size_t rows() const;
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  std::span<const T> data() const { return node_->value; }
  /// Direct write access; only meaningful on leaves (parameters, inputs).
  std::span<T> mutable_data() { return node_->value; }
  T item() const;
  T operator[](std::size_t i) const { return node_->value[i]; }
  T at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }
  std::vector<T> to_vector() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient values; zeros when nothing has been accumulated yet.
  std::vector<T> grad() const;
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  /// Same values, no graph history, requires_grad = false.
  Tensor detach() const;

  /// Reverse-mode pass from this scalar. Throws DomainError otherwise.
  void backward() const;

  detail::Node<T>& node() const { return *node_; }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  explicit Tensor(std::shared_ptr<detail::Node<T>> node)
      : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

/// Thread-local switch: while false, ops never record history.
bool grad_mode_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. When grad mode is on and any input requires grad,
/// the result records `inputs` as parents and `backward` as its rule;
/// `backward` receives the result node (value and grad populated).
template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> value,
                    std::initializer_list<Tensor<T>> inputs,
                    std::function<void(detail::Node<T>&)> backward);

template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> value,
                    const std::vector<Tensor<T>>& inputs,
                    std::function<void(detail::Node<T>&)> backward);

/// Adds `g` into the grad of `t` if it participates in differentiation.
template <typename T>
inline bool wants_grad(const Tensor<T>& t) {
  return t.node().requires_grad;
}

/// A named trainable tensor.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace dabs
