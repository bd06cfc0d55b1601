#include "mmer/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace mmer {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_strict = false;
}  // namespace

bool grad_mode_enabled() { return g_grad_enabled; }
bool strict_mode_enabled() { return g_strict; }

template <typename T>
void TensorImpl<T>::accumulate_grad(std::span<const T> g) {
  auto buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

template <typename T>
std::span<T> TensorImpl<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T{0});
  return grad;
}

template struct TensorImpl<float>;
template struct TensorImpl<double>;

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

StrictModeGuard::StrictModeGuard(bool enabled) : previous_(detail::g_strict) {
  detail::g_strict = enabled;
}
StrictModeGuard::~StrictModeGuard() { detail::g_strict = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> data(shape_numel(shape), value);
  return from(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor", {shape},
                     "expected " + std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!is_leaf()) throw std::logic_error("mutable_data: tensor is produced by a graph node");
  return impl_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item", {shape()}, "tensor does not hold exactly one value");
  }
  return impl_->data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= dim(0) || col >= dim(1)) {
    throw ShapeError("at", {shape()}, "index out of range for a rank-2 tensor");
  }
  return impl_->data[row * dim(1) + col];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool value) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad: only leaves can change");
  impl_->requires_grad = value;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(impl_->shape, impl_->data, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (!impl_->shape.empty()) {
    throw ShapeError("backward", {impl_->shape}, "loss must be a rank-0 scalar");
  }
  if (!impl_->requires_grad) {
    throw std::logic_error("backward: loss is detached from any differentiable graph");
  }
  if (!impl_->node) {
    const T one{1};
    impl_->accumulate_grad(std::span<const T>(&one, 1));
    return;
  }

  // Iterative post-order DFS gives a topological order over producing nodes.
  using Impl = detail::TensorImpl<T>;
  std::vector<Impl*> order;
  std::unordered_set<const Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node_impl, next] = stack.back();
    const auto* node = node_impl->node.get();
    if (node && next < node->inputs.size()) {
      Impl* child = node->inputs[next++].get();
      if (child->requires_grad && child->node && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node_impl);
    stack.pop_back();
  }

  // Intermediate grads restart per sweep; leaf grads accumulate.
  for (Impl* impl : order) impl->grad.assign(impl->data.size(), T{0});
  impl_->grad[0] = T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    (*it)->node->backward(**it);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mmer
