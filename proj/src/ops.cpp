#include "mmer/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace mmer {

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;
template <typename T>
using Impl = detail::TensorImpl<T>;
template <typename T>
using BackwardFn = std::function<void(const Impl<T>&)>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DynStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
void check_finite(const char* name, std::initializer_list<const Tensor<T>*> inputs) {
  if (!detail::strict_mode_enabled()) return;
  for (const Tensor<T>* t : inputs) {
    for (T v : t->data()) {
      if (!std::isfinite(v)) {
        throw NonFiniteError(std::string(name) + ": non-finite input " + shape_str(t->shape()));
      }
    }
  }
}

template <typename T>
Tensor<T> make_result(const char* name, Shape shape, std::vector<T> data,
                      std::vector<ImplPtr<T>> inputs, BackwardFn<T> backward) {
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(data));
  const bool record =
      detail::grad_mode_enabled() &&
      std::any_of(inputs.begin(), inputs.end(), [](const auto& p) { return p->requires_grad; });
  if (record) {
    auto node = std::make_shared<detail::GradNode<T>>();
    node->name = name;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl()->requires_grad = true;
    out.impl()->node = std::move(node);
  }
  return out;
}

// ---- broadcasting -------------------------------------------------------

enum class Bcast { kSame, kScalar, kRow, kColumn };

Bcast classify(const char* name, const Shape& a, const Shape& b) {
  if (a == b) return Bcast::kSame;
  if (shape_numel(b) == 1 && b.size() <= a.size()) return Bcast::kScalar;
  if (b.size() < a.size() && std::equal(b.begin(), b.end(), a.end() - b.size())) {
    return Bcast::kRow;
  }
  if (b.size() == a.size() && !a.empty() && b.back() == 1 &&
      std::equal(b.begin(), b.end() - 1, a.begin())) {
    return Bcast::kColumn;
  }
  throw ShapeError(name, {a, b}, "second operand does not broadcast to the first");
}

struct BcastIndex {
  Bcast kind;
  std::size_t b_numel;
  std::size_t last;
  std::size_t operator()(std::size_t i) const {
    switch (kind) {
      case Bcast::kSame: return i;
      case Bcast::kScalar: return 0;
      case Bcast::kRow: return i % b_numel;
      case Bcast::kColumn: return i / last;
    }
    return 0;
  }
};

BcastIndex make_index(Bcast kind, const Shape& a, const Shape& b) {
  return BcastIndex{kind, shape_numel(b), a.empty() ? 1 : a.back()};
}

template <typename T, typename Fwd, typename DA, typename DB>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, DA da,
                    DB db) {
  check_finite(name, {&a, &b});
  const Bcast kind = classify(name, a.shape(), b.shape());
  const BcastIndex bi = make_index(kind, a.shape(), b.shape());
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[bi(i)]);
  auto pa = a.impl();
  auto pb = b.impl();
  return make_result<T>(name, a.shape(), std::move(out), {pa, pb},
                        [pa, pb, bi, da, db](const Impl<T>& o) {
                          const auto& g = o.grad;
                          if (pa->requires_grad) {
                            auto ga = pa->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              ga[i] += g[i] * da(pa->data[i], pb->data[bi(i)]);
                            }
                          }
                          if (pb->requires_grad) {
                            auto gb = pb->grad_buffer();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[bi(i)] += g[i] * db(pa->data[i], pb->data[bi(i)]);
                            }
                          }
                        });
}

// dfn receives (input value, output value).
template <typename T, typename Fwd, typename Dfn>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Dfn dfn) {
  check_finite(name, {&x});
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  auto px = x.impl();
  return make_result<T>(name, x.shape(), std::move(out), {px}, [px, dfn](const Impl<T>& o) {
    if (!px->requires_grad) return;
    auto gx = px->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * dfn(px->data[i], o.data[i]);
  });
}

// (outer, extent, inner) decomposition around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const char* name, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(name, {shape}, "axis " + std::to_string(axis) + " out of range");
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- arithmetic -----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary_op<T>(
      "scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return add(x, Tensor<T>::scalar(value));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_finite("matmul", {&a, &b});
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul", {a.shape(), b.shape()}, "expected (M x K) . (K x N)");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  {
    Eigen::Map<const RowMat<T>> am(a.data().data(), m, k);
    Eigen::Map<const RowMat<T>> bm(b.data().data(), k, n);
    Eigen::Map<RowMat<T>> cm(out.data(), m, n);
    cm.noalias() = am * bm;
  }
  auto pa = a.impl();
  auto pb = b.impl();
  return make_result<T>("matmul", {m, n}, std::move(out), {pa, pb},
                        [pa, pb, m, k, n](const Impl<T>& o) {
                          Eigen::Map<const RowMat<T>> gm(o.grad.data(), m, n);
                          if (pa->requires_grad) {
                            Eigen::Map<const RowMat<T>> bm(pb->data.data(), k, n);
                            Eigen::Map<RowMat<T>> ga(pa->grad_buffer().data(), m, k);
                            ga.noalias() += gm * bm.transpose();
                          }
                          if (pb->requires_grad) {
                            Eigen::Map<const RowMat<T>> am(pa->data.data(), m, k);
                            Eigen::Map<RowMat<T>> gb(pb->grad_buffer().data(), k, n);
                            gb.noalias() += am.transpose() * gm;
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  check_finite("transpose", {&x});
  if (x.rank() != 2) throw ShapeError("transpose", {x.shape()}, "expected a rank-2 tensor");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  const auto xv = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  auto px = x.impl();
  return make_result<T>("transpose", {c, r}, std::move(out), {px}, [px, r, c](const Impl<T>& o) {
    if (!px->requires_grad) return;
    auto gx = px->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += o.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  check_finite("reshape", {&x});
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape", {x.shape(), shape}, "element count changes");
  }
  auto px = x.impl();
  return make_result<T>("reshape", std::move(shape), px->data, {px}, [px](const Impl<T>& o) {
    if (px->requires_grad) px->accumulate_grad(o.grad);
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat", {}, "no inputs");
  std::vector<Shape> shapes;
  for (const auto& p : parts) shapes.push_back(p.shape());
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat", shapes, "axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    check_finite("concat", {&p});
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat", shapes, "extents differ off the concatenation axis");
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const AxisSplit os = split_axis("concat", out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::vector<ImplPtr<T>> inputs;
  std::vector<std::size_t> offsets;  // offset of each part along the axis, in elements of a row
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.dim(axis) * os.inner;
    const auto pv = p.data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.begin() + o * chunk, chunk, out.begin() + o * total * os.inner + offset);
    }
    inputs.push_back(p.impl());
    offsets.push_back(offset);
    offset += chunk;
  }
  const std::size_t row = total * os.inner;
  auto captured = inputs;
  return make_result<T>(
      "concat", std::move(out_shape), std::move(out), std::move(inputs),
      [captured, offsets, row, outer = os.outer](const Impl<T>& o) {
        for (std::size_t idx = 0; idx < captured.size(); ++idx) {
          const auto& p = captured[idx];
          if (!p->requires_grad) continue;
          const std::size_t chunk = p->data.size() / outer;
          auto gp = p->grad_buffer();
          for (std::size_t r = 0; r < outer; ++r)
            for (std::size_t e = 0; e < chunk; ++e) gp[r * chunk + e] += o.grad[r * row + offsets[idx] + e];
        }
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_finite("slice", {&x});
  const AxisSplit s = split_axis("slice", x.shape(), axis);
  if (start + length > s.extent) {
    throw ShapeError("slice", {x.shape()},
                     "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis " + std::to_string(axis));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t src_row = s.extent * s.inner;
  const std::size_t dst_row = length * s.inner;
  std::vector<T> out(s.outer * dst_row);
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + o * src_row + start * s.inner, dst_row, out.begin() + o * dst_row);
  }
  auto px = x.impl();
  return make_result<T>("slice", std::move(out_shape), std::move(out), {px},
                        [px, s, start, src_row, dst_row](const Impl<T>& o) {
                          if (!px->requires_grad) return;
                          auto gx = px->grad_buffer();
                          for (std::size_t r = 0; r < s.outer; ++r)
                            for (std::size_t e = 0; e < dst_row; ++e)
                              gx[r * src_row + start * s.inner + e] += o.grad[r * dst_row + e];
                        });
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const char* name, const Tensor<T>& x, std::size_t axis, bool keepdim,
                      T factor) {
  check_finite(name, {&x});
  const AxisSplit s = split_axis(name, x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  std::vector<T> out(s.outer * s.inner, T{0});
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xv[(o * s.extent + e) * s.inner + i];
  for (T& v : out) v *= factor;
  auto px = x.impl();
  return make_result<T>(name, std::move(out_shape), std::move(out), {px},
                        [px, s, factor](const Impl<T>& o) {
                          if (!px->requires_grad) return;
                          auto gx = px->grad_buffer();
                          for (std::size_t r = 0; r < s.outer; ++r)
                            for (std::size_t e = 0; e < s.extent; ++e)
                              for (std::size_t i = 0; i < s.inner; ++i)
                                gx[(r * s.extent + e) * s.inner + i] += factor * o.grad[r * s.inner + i];
                        });
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  return reduce_axis<T>("sum", x, axis, keepdim, T{1});
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis("mean", x.shape(), axis);
  if (s.extent == 0) throw ShapeError("mean", {x.shape()}, "empty axis");
  return reduce_axis<T>("mean", x, axis, keepdim, T{1} / static_cast<T>(s.extent));
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  return reduce_axis<T>("sum_all", reshape(x, {x.numel()}), 0, false, T{1});
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean_all", {x.shape()}, "empty tensor");
  return reduce_axis<T>("mean_all", reshape(x, {x.numel()}), 0, false,
                        T{1} / static_cast<T>(x.numel()));
}

// ---- nonlinearities -------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op<T>(
      "relu", x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T{1} / std::numbers::sqrt2_v<T>;
  const T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary_op<T>(
      "gelu", x, [=](T v) { return T{0.5} * v * (T{1} + std::erf(v * inv_sqrt2)); },
      [=](T v, T) {
        return T{0.5} * (T{1} + std::erf(v * inv_sqrt2)) + v * std::exp(T{-0.5} * v * v) * inv_sqrt2pi;
      });
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  return kind == Activation::kGelu ? gelu(x) : relu(x);
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_op<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary_op<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  check_finite("softmax", {&x});
  const AxisSplit s = split_axis("softmax", x.shape(), axis);
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  auto at = [&](std::size_t o, std::size_t e, std::size_t i) { return (o * s.extent + e) * s.inner + i; };
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) peak = std::max(peak, xv[at(o, e, i)]);
      T total{0};
      for (std::size_t e = 0; e < s.extent; ++e) {
        out[at(o, e, i)] = std::exp(xv[at(o, e, i)] - peak);
        total += out[at(o, e, i)];
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[at(o, e, i)] /= total;
    }
  }
  auto px = x.impl();
  return make_result<T>("softmax", x.shape(), std::move(out), {px}, [px, s](const Impl<T>& o) {
    if (!px->requires_grad) return;
    auto gx = px->grad_buffer();
    auto at = [&](std::size_t r, std::size_t e, std::size_t i) { return (r * s.extent + e) * s.inner + i; };
    for (std::size_t r = 0; r < s.outer; ++r) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        T dot{0};
        for (std::size_t e = 0; e < s.extent; ++e) dot += o.grad[at(r, e, i)] * o.data[at(r, e, i)];
        for (std::size_t e = 0; e < s.extent; ++e) {
          gx[at(r, e, i)] += o.data[at(r, e, i)] * (o.grad[at(r, e, i)] - dot);
        }
      }
    }
  });
}

// ---- structural -----------------------------------------------------------

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  check_finite("broadcast_to", {&x});
  const Bcast kind = classify("broadcast_to", shape, x.shape());
  const BcastIndex bi = make_index(kind, shape, x.shape());
  std::vector<T> out(shape_numel(shape));
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[bi(i)];
  auto px = x.impl();
  return make_result<T>("broadcast_to", shape, std::move(out), {px}, [px, bi](const Impl<T>& o) {
    if (!px->requires_grad) return;
    auto gx = px->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) gx[bi(i)] += o.grad[i];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices) {
  check_finite("gather_rows", {&x});
  if (x.rank() == 0) throw ShapeError("gather_rows", {x.shape()}, "rank-0 input");
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows == 0 ? 0 : x.numel() / rows;
  for (std::size_t idx : indices) {
    if (idx >= rows) {
      throw ShapeError("gather_rows", {x.shape()}, "row index " + std::to_string(idx) + " out of range");
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = indices.size();
  std::vector<T> out(indices.size() * width);
  const auto xv = x.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(xv.begin() + indices[r] * width, width, out.begin() + r * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  auto px = x.impl();
  return make_result<T>("gather_rows", std::move(out_shape), std::move(out), {px},
                        [px, idx = std::move(idx), width](const Impl<T>& o) {
                          if (!px->requires_grad) return;
                          auto gx = px->grad_buffer();
                          for (std::size_t r = 0; r < idx.size(); ++r)
                            for (std::size_t e = 0; e < width; ++e) gx[idx[r] * width + e] += o.grad[r * width + e];
                        });
}

template <typename T>
Tensor<T> mask_apply(const Tensor<T>& x, std::vector<T> mask) {
  check_finite("mask_apply", {&x});
  if (mask.size() != x.numel()) {
    throw ShapeError("mask_apply", {x.shape(), Shape{mask.size()}}, "mask size differs from input");
  }
  const auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
  auto px = x.impl();
  return make_result<T>("mask_apply", x.shape(), std::move(out), {px},
                        [px, mask = std::move(mask)](const Impl<T>& o) {
                          if (!px->requires_grad) return;
                          auto gx = px->grad_buffer();
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * mask[i];
                        });
}

template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after, T value) {
  check_finite("pad", {&x});
  const AxisSplit s = split_axis("pad", x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] += before + after;
  const std::size_t src_row = s.extent * s.inner;
  const std::size_t dst_row = out_shape[axis] * s.inner;
  std::vector<T> out(s.outer * dst_row, value);
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + o * src_row, src_row, out.begin() + o * dst_row + before * s.inner);
  }
  auto px = x.impl();
  const std::size_t lead = before * s.inner;
  return make_result<T>("pad", std::move(out_shape), std::move(out), {px},
                        [px, s, src_row, dst_row, lead](const Impl<T>& o) {
                          if (!px->requires_grad) return;
                          auto gx = px->grad_buffer();
                          for (std::size_t r = 0; r < s.outer; ++r)
                            for (std::size_t e = 0; e < src_row; ++e)
                              gx[r * src_row + e] += o.grad[r * dst_row + lead + e];
                        });
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t dilation, std::size_t stride) {
  check_finite("conv1d", {&x, &kernel});
  if (dilation < 1 || stride < 1) {
    throw ShapeError("conv1d", {x.shape(), kernel.shape()}, "dilation and stride must be >= 1");
  }
  if (x.rank() != 2 || kernel.rank() != 3 || kernel.dim(1) != x.dim(1) || kernel.dim(2) == 0) {
    throw ShapeError("conv1d", {x.shape(), kernel.shape()},
                     "expected x (T x C_in) and kernel (C_out x C_in x k)");
  }
  const std::size_t steps = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = kernel.dim(0), taps = kernel.dim(2);
  const std::size_t span = (taps - 1) * dilation + 1;
  if (steps < span) {
    throw ShapeError("conv1d", {x.shape(), kernel.shape()},
                     "input shorter than the dilated kernel span " + std::to_string(span));
  }
  const std::size_t len = (steps - span) / stride + 1;
  std::vector<T> out(len * c_out, T{0});

  // Per tap j: out (L x C_out) += X_j (L x C_in) . W_j^T, where X_j starts at
  // row j*dilation with row stride `stride` and W_j is column j of the kernel.
  const auto xv = x.data();
  const auto kv = kernel.data();
  const DynStride x_stride(static_cast<Eigen::Index>(stride * c_in), 1);
  const DynStride w_stride(static_cast<Eigen::Index>(c_in * taps), static_cast<Eigen::Index>(taps));
  {
    Eigen::Map<RowMat<T>> om(out.data(), len, c_out);
    for (std::size_t j = 0; j < taps; ++j) {
      Eigen::Map<const RowMat<T>, 0, DynStride> xj(xv.data() + j * dilation * c_in, len, c_in, x_stride);
      Eigen::Map<const RowMat<T>, 0, DynStride> wj(kv.data() + j, c_out, c_in, w_stride);
      om.noalias() += xj * wj.transpose();
    }
  }
  auto px = x.impl();
  auto pk = kernel.impl();
  return make_result<T>(
      "conv1d", {len, c_out}, std::move(out), {px, pk},
      [px, pk, len, c_in, c_out, taps, dilation, x_stride, w_stride](const Impl<T>& o) {
        Eigen::Map<const RowMat<T>> gm(o.grad.data(), len, c_out);
        for (std::size_t j = 0; j < taps; ++j) {
          if (px->requires_grad) {
            Eigen::Map<const RowMat<T>, 0, DynStride> wj(pk->data.data() + j, c_out, c_in, w_stride);
            Eigen::Map<RowMat<T>, 0, DynStride> gxj(px->grad_buffer().data() + j * dilation * c_in, len,
                                                     c_in, x_stride);
            gxj.noalias() += gm * wj;
          }
          if (pk->requires_grad) {
            Eigen::Map<const RowMat<T>, 0, DynStride> xj(px->data.data() + j * dilation * c_in, len, c_in,
                                                         x_stride);
            Eigen::Map<RowMat<T>, 0, DynStride> gwj(pk->grad_buffer().data() + j, c_out, c_in, w_stride);
            gwj.noalias() += gm.transpose() * xj;
          }
        }
      });
}

#define MMER_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                     \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);         \
  template Tensor<T> sum(const Tensor<T>&, std::size_t, bool);                               \
  template Tensor<T> mean(const Tensor<T>&, std::size_t, bool);                              \
  template Tensor<T> sum_all(const Tensor<T>&);                                              \
  template Tensor<T> mean_all(const Tensor<T>&);                                             \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> gelu(const Tensor<T>&);                                                 \
  template Tensor<T> activate(const Tensor<T>&, Activation);                                 \
  template Tensor<T> exp(const Tensor<T>&);                                                  \
  template Tensor<T> log(const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> tanh(const Tensor<T>&);                                                 \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                           \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);            \
  template Tensor<T> mask_apply(const Tensor<T>&, std::vector<T>);                           \
  template Tensor<T> pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t, T);        \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);

MMER_INSTANTIATE_OPS(float)
MMER_INSTANTIATE_OPS(double)

}  // namespace mmer
