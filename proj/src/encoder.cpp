#include "mmer/encoder.hpp"

namespace mmer {

void EncoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || ffn_dim == 0 || max_len == 0) {
    throw ConfigError("encoder: d_model, n_heads, ffn_dim and max_len must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("encoder: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (use_positional_encoding && d_model % 2 != 0) {
    throw ConfigError("encoder: positional encoding needs an even d_model");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must lie in [0, 1)");
}

template <typename T>
EncoderParams<T> init_encoder(ParamStore<T>& store, const std::string& prefix, const EncoderConfig& cfg,
                              Rng& rng) {
  cfg.validate();
  EncoderParams<T> params;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string name = prefix + ".layer" + std::to_string(l);
    EncoderLayerParams<T> layer;
    layer.attn_norm = init_layer_norm(store, name + ".attn_norm", cfg.d_model);
    layer.attention = init_attention(store, name + ".attention", cfg.d_model, rng);
    layer.ffn_norm = init_layer_norm(store, name + ".ffn_norm", cfg.d_model);
    layer.ffn_in = init_linear(store, name + ".ffn_in", cfg.d_model, cfg.ffn_dim, rng);
    layer.ffn_out = init_linear(store, name + ".ffn_out", cfg.ffn_dim, cfg.d_model, rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

template <typename T>
Tensor<T> encoder_layer(const Tensor<T>& x, const EncoderLayerParams<T>& params, const EncoderConfig& cfg,
                        const ForwardContext& ctx) {
  const Tensor<T> attended =
      multi_head_self_attention(layer_norm(x, params.attn_norm), params.attention, cfg.n_heads);
  const Tensor<T> h = add(x, dropout(attended, cfg.dropout, ctx));
  const Tensor<T> hidden = activate(linear_forward(layer_norm(h, params.ffn_norm), params.ffn_in), cfg.activation);
  return add(h, dropout(linear_forward(hidden, params.ffn_out), cfg.dropout, ctx));
}

template <typename T>
Tensor<T> encoder_forward(const Tensor<T>& x, const EncoderParams<T>& params, const EncoderConfig& cfg,
                          const ForwardContext& ctx) {
  if (x.rank() != 2 || x.dim(1) != cfg.d_model) {
    throw ShapeError("encoder", {x.shape()}, "expected (T x " + std::to_string(cfg.d_model) + ")");
  }
  if (x.dim(0) > cfg.max_len) {
    throw ConfigError("encoder: segment length " + std::to_string(x.dim(0)) + " exceeds max_len " +
                      std::to_string(cfg.max_len));
  }
  Tensor<T> h = x;
  if (cfg.use_positional_encoding) {
    h = add(h, sinusoidal_positional_encoding<T>(x.dim(0), cfg.d_model));
  }
  for (const auto& layer : params.layers) h = encoder_layer(h, layer, cfg, ctx);
  return h;
}

#define MMER_INSTANTIATE_ENCODER(T)                                                                     \
  template EncoderParams<T> init_encoder(ParamStore<T>&, const std::string&, const EncoderConfig&, Rng&); \
  template Tensor<T> encoder_layer(const Tensor<T>&, const EncoderLayerParams<T>&, const EncoderConfig&, \
                                   const ForwardContext&);                                              \
  template Tensor<T> encoder_forward(const Tensor<T>&, const EncoderParams<T>&, const EncoderConfig&,   \
                                     const ForwardContext&);

MMER_INSTANTIATE_ENCODER(float)
MMER_INSTANTIATE_ENCODER(double)

}  // namespace mmer
