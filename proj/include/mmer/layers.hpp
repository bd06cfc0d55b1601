#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mmer/ops.hpp"
#include "mmer/tensor.hpp"

namespace mmer {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

/// Per-forward-pass state. Dropout draws from `rng`, which the caller owns;
/// train mode with nonzero dropout requires it.
struct ForwardContext {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;
};

/// Ordered registry of learnable tensors with stable hierarchical names.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool decay = true;  // subject to decoupled weight decay
  };

  /// Registers `tensor` as a trainable leaf. Names must be unique.
  Tensor<T> add(const std::string& name, Tensor<T> tensor, bool decay);

  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<NamedTensor<T>> named() const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // (in x out)
  Tensor<T> bias;    // (out)
};

template <typename T>
struct Conv1dParams {
  Tensor<T> kernel;  // (out_ch x in_ch x k)
  Tensor<T> bias;    // (out_ch)
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
struct AttentionParams {
  LinearParams<T> query;
  LinearParams<T> key;
  LinearParams<T> value;
  LinearParams<T> output;
};

// Initializers register their tensors in `store` under `prefix`.
// Linear weights are Xavier-uniform, conv kernels He-uniform, biases zero,
// layer norm gamma one and beta zero.
template <typename T>
LinearParams<T> init_linear(ParamStore<T>& store, const std::string& prefix, std::size_t in,
                            std::size_t out, Rng& rng);
template <typename T>
Conv1dParams<T> init_conv1d(ParamStore<T>& store, const std::string& prefix, std::size_t in_ch,
                            std::size_t out_ch, std::size_t kernel_size, Rng& rng);
template <typename T>
LayerNormParams<T> init_layer_norm(ParamStore<T>& store, const std::string& prefix, std::size_t dim);
template <typename T>
AttentionParams<T> init_attention(ParamStore<T>& store, const std::string& prefix, std::size_t d_model,
                                  Rng& rng);

/// y = x W + b over the trailing dimension.
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const LinearParams<T>& p);

/// Causal dilated convolution: left zero-padding of (k-1)*dilation keeps the
/// length, and output t only sees inputs at times <= t.
template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Conv1dParams<T>& p, std::size_t dilation,
                        std::size_t kernel_size);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p, T eps = T(1e-5));

/// Unmasked scaled dot-product attention, scale 1/sqrt(d_model / n_heads).
template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x, const AttentionParams<T>& p,
                                    std::size_t n_heads);

/// Inverted dropout. Identity in eval mode or when p_drop == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, const ForwardContext& ctx);

/// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(t / 10000^(2i/d)).
template <typename T>
Tensor<T> sinusoidal_positional_encoding(std::size_t steps, std::size_t d_model);

}  // namespace mmer
