// Copyright 2026 The DABS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dabs/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "dabs/error.hpp"

namespace dabs {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_mode = true;

void check_shape(const Shape& shape, std::size_t values) {
  for (auto e : shape)
    if (e == 0) throw DimensionError("zero extent in shape " + shape_str(shape));
  if (shape_numel(shape) != values)
    throw DimensionError("shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values));
}
}  // namespace

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values) {
  check_shape(shape, values.size());
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from(Shape{}, std::vector<T>{value});
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Shape shape, std::vector<T> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  return node_->shape.empty() ? 1 : node_->shape.back();
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  return node_->shape.empty() ? 1 : numel() / node_->shape.back();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1)
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
std::vector<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return std::vector<T>(numel(), T(0));
  return node_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(node_->shape, node_->value);
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1)
    throw DomainError("backward() needs a scalar loss, got shape " +
                      shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* n = *it;
    if (n->is_leaf || n->grad.empty() || !n->backward_fn) continue;
    n->backward_fn(*n);
    // Intermediate grads are consumed once; leaves keep accumulating.
    if (n != node_.get()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> value,
                    const std::vector<Tensor<T>>& inputs,
                    std::function<void(detail::Node<T>&)> backward) {
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (shape_numel(node->shape) != node->value.size())
    throw DimensionError("op produced " + std::to_string(node->value.size()) +
                         " values for shape " + shape_str(node->shape));
  if (g_grad_mode) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.node().requires_grad;
    if (any) {
      node->requires_grad = true;
      node->is_leaf = false;
      node->parents.reserve(inputs.size());
      for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
      node->backward_fn = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> value,
                    std::initializer_list<Tensor<T>> inputs,
                    std::function<void(detail::Node<T>&)> backward) {
  return record_op<T>(std::move(shape), std::move(value),
                      std::vector<Tensor<T>>(inputs), std::move(backward));
}

template class Tensor<float>;
template class Tensor<double>;

template Tensor<float> record_op(Shape, std::vector<float>,
                                 const std::vector<Tensor<float>>&,
                                 std::function<void(detail::Node<float>&)>);
template Tensor<double> record_op(Shape, std::vector<double>,
                                  const std::vector<Tensor<double>>&,
                                  std::function<void(detail::Node<double>&)>);
template Tensor<float> record_op(Shape, std::vector<float>,
                                 std::initializer_list<Tensor<float>>,
                                 std::function<void(detail::Node<float>&)>);
template Tensor<double> record_op(Shape, std::vector<double>,
                                  std::initializer_list<Tensor<double>>,
                                  std::function<void(detail::Node<double>&)>);

}  // namespace dabs
