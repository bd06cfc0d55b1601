#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmer/tensor.hpp"

// Differentiable primitives. Every model computation is composed from this
// closed set, so gradient correctness is established here once.
//
// Binary elementwise ops broadcast only their second operand, and only in
// these forms: identical shape, a single value, a suffix of the first
// operand's shape (row broadcast), or the first operand's shape with the
// trailing extent set to 1 (per-row broadcast).

namespace mmer {

enum class Activation { kRelu, kGelu };

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);

/// (M x K) . (K x N) -> (M x N)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Rank-2 transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Elements [start, start + length) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
/// Sum of every element, rank-0 result.
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Exact (erf-based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);
template <typename T>
Tensor<T> log(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Expands `x` to `shape` under the broadcasting rule above.
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
/// Selects entries of axis 0 by index; repeated indices are allowed.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices);
/// Elementwise product with a constant (non-differentiable) mask.
template <typename T>
Tensor<T> mask_apply(const Tensor<T>& x, std::vector<T> mask);
/// Constant padding along one axis.
template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after,
              T value = T{0});
/// Valid (unpadded) 1-D convolution over time.
/// x: (T x C_in), kernel: (C_out x C_in x k) -> ((T - (k-1)*dilation - 1) / stride + 1 x C_out).
/// Tap j reads x[t*stride + j*dilation].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t dilation = 1,
                 std::size_t stride = 1);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

}  // namespace mmer
