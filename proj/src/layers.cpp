#include "mmer/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mmer {

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& name, Tensor<T> tensor, bool decay) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, tensor, decay});
  return tensor;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

template <typename T>
std::vector<NamedTensor<T>> ParamStore<T>::named() const {
  std::vector<NamedTensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back({e.name, e.tensor});
  return out;
}

template <typename T>
std::size_t ParamStore<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

namespace {

template <typename T>
Tensor<T> uniform(Shape shape, T bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(data));
}

}  // namespace

template <typename T>
LinearParams<T> init_linear(ParamStore<T>& store, const std::string& prefix, std::size_t in,
                            std::size_t out, Rng& rng) {
  const T bound = static_cast<T>(std::sqrt(6.0 / static_cast<double>(in + out)));
  return {store.add(prefix + ".weight", uniform<T>({in, out}, bound, rng), true),
          store.add(prefix + ".bias", Tensor<T>::zeros({out}), false)};
}

template <typename T>
Conv1dParams<T> init_conv1d(ParamStore<T>& store, const std::string& prefix, std::size_t in_ch,
                            std::size_t out_ch, std::size_t kernel_size, Rng& rng) {
  const T bound = static_cast<T>(std::sqrt(6.0 / static_cast<double>(in_ch * kernel_size)));
  return {store.add(prefix + ".kernel", uniform<T>({out_ch, in_ch, kernel_size}, bound, rng), true),
          store.add(prefix + ".bias", Tensor<T>::zeros({out_ch}), false)};
}

template <typename T>
LayerNormParams<T> init_layer_norm(ParamStore<T>& store, const std::string& prefix, std::size_t dim) {
  return {store.add(prefix + ".gamma", Tensor<T>::full({dim}, T{1}), false),
          store.add(prefix + ".beta", Tensor<T>::zeros({dim}), false)};
}

template <typename T>
AttentionParams<T> init_attention(ParamStore<T>& store, const std::string& prefix, std::size_t d_model,
                                  Rng& rng) {
  AttentionParams<T> p;
  p.query = init_linear(store, prefix + ".query", d_model, d_model, rng);
  p.key = init_linear(store, prefix + ".key", d_model, d_model, rng);
  p.value = init_linear(store, prefix + ".value", d_model, d_model, rng);
  p.output = init_linear(store, prefix + ".output", d_model, d_model, rng);
  return p;
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const LinearParams<T>& p) {
  const std::size_t in = p.weight.dim(0);
  const std::size_t out = p.weight.dim(1);
  if (x.rank() == 0 || x.shape().back() != in) {
    throw ShapeError("linear", {x.shape(), p.weight.shape()}, "trailing dim must equal weight rows");
  }
  if (x.rank() == 2) return add(matmul(x, p.weight), p.bias);
  Shape out_shape = x.shape();
  out_shape.back() = out;
  const Tensor<T> flat = reshape(x, {x.numel() / in, in});
  return reshape(add(matmul(flat, p.weight), p.bias), std::move(out_shape));
}

template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Conv1dParams<T>& p, std::size_t dilation,
                        std::size_t kernel_size) {
  if (x.rank() != 2 || x.dim(0) == 0) {
    throw ShapeError("conv1d_causal", {x.shape()}, "expected a non-empty (T x C_in) sequence");
  }
  if (dilation < 1) throw ShapeError("conv1d_causal", {x.shape()}, "dilation must be >= 1");
  if (kernel_size < 1 || p.kernel.rank() != 3 || p.kernel.dim(2) != kernel_size) {
    throw ShapeError("conv1d_causal", {x.shape(), p.kernel.shape()},
                     "kernel does not match kernel_size " + std::to_string(kernel_size));
  }
  const Tensor<T> padded = pad(x, 0, (kernel_size - 1) * dilation, 0);
  return add(conv1d(padded, p.kernel, dilation, 1), p.bias);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p, T eps) {
  if (x.rank() == 0 || x.shape().back() == 0 || p.gamma.shape() != Shape{x.shape().back()}) {
    throw ShapeError("layer_norm", {x.shape(), p.gamma.shape()}, "trailing dim must match gamma");
  }
  const std::size_t axis = x.rank() - 1;
  const Tensor<T> centered = sub(x, mean(x, axis, true));
  const Tensor<T> variance = mean(mul(centered, centered), axis, true);
  // 1/sqrt(v + eps) expressed as exp(-log(v + eps) / 2).
  const Tensor<T> inv_std = exp(scale(log(add_scalar(variance, eps)), T{-0.5}));
  return add(mul(mul(centered, inv_std), p.gamma), p.beta);
}

template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x, const AttentionParams<T>& p,
                                    std::size_t n_heads) {
  const std::size_t d_model = p.query.weight.dim(0);
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (x.rank() != 2 || x.dim(1) != d_model) {
    throw ShapeError("attention", {x.shape(), p.query.weight.shape()}, "expected (T x d_model)");
  }
  const std::size_t head_dim = d_model / n_heads;
  const T scale_factor = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  const Tensor<T> q = linear_forward(x, p.query);
  const Tensor<T> k = linear_forward(x, p.key);
  const Tensor<T> v = linear_forward(x, p.value);
  std::vector<Tensor<T>> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor<T> qh = slice(q, 1, h * head_dim, head_dim);
    const Tensor<T> kh = slice(k, 1, h * head_dim, head_dim);
    const Tensor<T> vh = slice(v, 1, h * head_dim, head_dim);
    const Tensor<T> weights = softmax(scale(matmul(qh, transpose(kh)), scale_factor), 1);
    heads.push_back(matmul(weights, vh));
  }
  const Tensor<T> merged = n_heads == 1 ? heads.front() : concat(heads, 1);
  return linear_forward(merged, p.output);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, const ForwardContext& ctx) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p_drop));
  }
  if (ctx.mode == Mode::kEval || p_drop == 0.0) return x;
  if (ctx.rng == nullptr) throw std::logic_error("dropout: train mode requires an rng");
  std::bernoulli_distribution keep(1.0 - p_drop);
  const T survivor = static_cast<T>(1.0 / (1.0 - p_drop));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = keep(*ctx.rng) ? survivor : T{0};
  return mask_apply(x, std::move(mask));
}

template <typename T>
Tensor<T> sinusoidal_positional_encoding(std::size_t steps, std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even d_model, got " + std::to_string(d_model));
  }
  std::vector<T> data(steps * d_model);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * freq;
      data[t * d_model + i] = static_cast<T>(std::sin(angle));
      data[t * d_model + i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>::from({steps, d_model}, std::move(data));
}

#define MMER_INSTANTIATE_LAYERS(T)                                                                    \
  template class ParamStore<T>;                                                                       \
  template LinearParams<T> init_linear(ParamStore<T>&, const std::string&, std::size_t, std::size_t, \
                                       Rng&);                                                         \
  template Conv1dParams<T> init_conv1d(ParamStore<T>&, const std::string&, std::size_t, std::size_t, \
                                       std::size_t, Rng&);                                            \
  template LayerNormParams<T> init_layer_norm(ParamStore<T>&, const std::string&, std::size_t);       \
  template AttentionParams<T> init_attention(ParamStore<T>&, const std::string&, std::size_t, Rng&);  \
  template Tensor<T> linear_forward(const Tensor<T>&, const LinearParams<T>&);                        \
  template Tensor<T> conv1d_causal(const Tensor<T>&, const Conv1dParams<T>&, std::size_t,            \
                                   std::size_t);                                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const LayerNormParams<T>&, T);                      \
  template Tensor<T> multi_head_self_attention(const Tensor<T>&, const AttentionParams<T>&,          \
                                               std::size_t);                                          \
  template Tensor<T> dropout(const Tensor<T>&, double, const ForwardContext&);                        \
  template Tensor<T> sinusoidal_positional_encoding<T>(std::size_t, std::size_t);

MMER_INSTANTIATE_LAYERS(float)
MMER_INSTANTIATE_LAYERS(double)

}  // namespace mmer
