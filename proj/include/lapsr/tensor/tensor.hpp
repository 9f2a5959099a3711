#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lapsr/error.hpp"

namespace lapsr {

struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) +
           ", " + std::to_string(w) + ")";
  }
};

template <class T>
class Tensor;

namespace detail {

template <class T>
struct TensorImpl;

// One recorded operation. `backward` receives the gradient of the node's
// output and pushes contributions into the inputs' gradient buffers.
template <class T>
struct Node {
  std::string kind;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(std::span<const T>)> backward;
  bool consumed = false;
};

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::optional<std::vector<T>> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;

  std::vector<T>& ensure_grad() {
    if (!grad) grad.emplace(data.size(), T(0));
    return *grad;
  }
};

}  // namespace detail

// Rank-4 (batch, channel, height, width) row-major tensor. Copies share
// storage, like a handle; use clone() for an independent copy.
template <class T>
class Tensor {
 public:
  using value_type = T;
  using Impl = detail::TensorImpl<T>;

  Tensor() : impl_(std::make_shared<Impl>()) {}
  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<Impl>()) {
    impl_->shape = shape;
    impl_->data.assign(shape.numel(), fill);
  }
  Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
    if (values.size() != shape.numel())
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape.str());
    impl_->shape = shape;
    impl_->data = std::move(values);
  }

  static Tensor scalar(T value) { return Tensor(Shape{1, 1, 1, 1}, value); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  bool is_scalar() const { return numel() == 1; }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T item() const {
    if (!is_scalar()) throw ShapeError("item() requires a single-element tensor, got " + shape().str());
    return impl_->data[0];
  }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return impl_->data[index(n, c, h, w)];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return impl_->data[index(n, c, h, w)];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    impl_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const T> grad() const {
    if (!impl_->grad) throw AutogradError("tensor has no gradient");
    return *impl_->grad;
  }
  std::span<T> grad_mut() { return impl_->ensure_grad(); }
  void clear_grad() { impl_->grad.reset(); }

  // Recorded producer, empty for leaves.
  const std::shared_ptr<detail::Node<T>>& grad_fn() const { return impl_->grad_fn; }

  Tensor clone() const {
    Tensor out(shape(), impl_->data);
    out.impl_->requires_grad = impl_->requires_grad;
    return out;
  }
  Tensor detach() const { return Tensor(shape(), impl_->data); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Reverse pass from a scalar. Gradients accumulate into every reachable
  // requires_grad leaf; the recorded graph is released afterwards.
  void backward() const;

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

 private:
  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = impl_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }

  std::shared_ptr<Impl> impl_;
};

namespace detail {

template <class T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Attaches a node to `out` when any input participates in differentiation.
template <class T>
void record(Tensor<T>& out, std::string kind, std::vector<Tensor<T>> inputs,
            std::function<void(std::span<const T>)> backward) {
  bool needed = false;
  for (const auto& t : inputs) needed = needed || t.requires_grad();
  if (!needed) return;
  auto node = std::make_shared<Node<T>>();
  node->kind = std::move(kind);
  for (const auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
}

// Gradient buffer of `t` if it participates, else nullptr.
template <class T>
T* grad_target(const Tensor<T>& t) {
  return t.requires_grad() ? t.impl()->ensure_grad().data() : nullptr;
}

}  // namespace detail

template <class T>
void Tensor<T>::backward() const {
  if (!is_scalar()) throw AutogradError("backward() requires a scalar loss, got shape " + shape().str());
  if (!impl_->grad_fn) {
    if (!impl_->requires_grad) throw AutogradError("loss is not connected to any requires_grad tensor");
    impl_->ensure_grad()[0] += T(1);
    return;
  }
  if (impl_->grad_fn->consumed) throw AutogradError("graph already consumed by a previous backward()");

  // Post-order DFS gives a topological order; reversed, each node runs after
  // every consumer of its output has contributed.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::shared_ptr<Impl>> keep;  // releasing a node's inputs must not free pending nodes
  std::vector<std::pair<Impl*, std::size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    const auto& fn = cur->grad_fn;
    if (fn && next < fn->inputs.size()) {
      Impl* child = fn->inputs[next++].get();
      if (child->grad_fn && !seen.contains(child)) {
        if (child->grad_fn->consumed) throw AutogradError("graph already consumed by a previous backward()");
        seen.insert(child);
        keep.push_back(fn->inputs[next - 1]);
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(cur);
    stack.pop_back();
  }

  impl_->ensure_grad().assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* cur = *it;
    auto node = cur->grad_fn;
    node->backward(*cur->grad);
    node->backward = nullptr;
    node->inputs.clear();
    node->consumed = true;
    // Interior gradients are scratch space.
    cur->grad.reset();
  }
}

}  // namespace lapsr
