#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mmer/errors.hpp"

namespace mmer {

std::size_t shape_numel(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct GradNode {
  std::string name;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Reads out.grad and accumulates into the grads of `inputs`.
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<GradNode<T>> node;

  void accumulate_grad(std::span<const T> g);
  std::span<T> grad_buffer();  // allocates zeros on first use
};

bool grad_mode_enabled();
bool strict_mode_enabled();

}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// While alive, every primitive on the current thread rejects non-finite inputs.
class StrictModeGuard {
 public:
  explicit StrictModeGuard(bool enabled = true);
  ~StrictModeGuard();
  StrictModeGuard(const StrictModeGuard&) = delete;
  StrictModeGuard& operator=(const StrictModeGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor handle. Copies share storage and graph position;
/// values are immutable once produced by a primitive, only grads accumulate.
/// Leaves (parameters, inputs) may be written through `mutable_data()`.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data();
  T item() const;
  T at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const { return impl_->node == nullptr; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad();
  const std::string* producer() const { return impl_->node ? &impl_->node->name : nullptr; }

  /// Copy of the values, detached from any graph.
  Tensor detach() const;

  /// Reverse-mode sweep from this scalar. Leaf grads accumulate across
  /// calls; callers reset them with zero_grad().
  void backward() const;

  // Internal handle used by primitives.
  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mmer
