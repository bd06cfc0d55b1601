#pragma once

#include <string>
#include <vector>

#include "mmer/layers.hpp"

namespace mmer {

struct EncoderConfig {
  std::size_t d_model = 512;
  std::size_t n_heads = 8;
  std::size_t n_layers = 4;
  std::size_t ffn_dim = 1024;
  double dropout = 0.3;
  bool use_positional_encoding = true;
  std::size_t max_len = 1024;
  Activation activation = Activation::kRelu;

  void validate() const;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> attn_norm;
  AttentionParams<T> attention;
  LayerNormParams<T> ffn_norm;
  LinearParams<T> ffn_in;
  LinearParams<T> ffn_out;
};

template <typename T>
struct EncoderParams {
  std::vector<EncoderLayerParams<T>> layers;
};

template <typename T>
EncoderParams<T> init_encoder(ParamStore<T>& store, const std::string& prefix, const EncoderConfig& cfg,
                              Rng& rng);

/// Pre-norm layer:
///   x = x + dropout(attention(norm(x)))
///   x = x + dropout(ffn_out(act(ffn_in(norm(x)))))
template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& x, const EncoderLayerParams<T>& params, const EncoderConfig& cfg,
                        const ForwardContext& ctx);

/// Encodes one segment. Holds no state between calls, so segments never
/// see each other.
template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& x, const EncoderParams<T>& params, const EncoderConfig& cfg,
                          const ForwardContext& ctx);

}  // namespace mmer
