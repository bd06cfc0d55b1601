#include "mmer/tcn.hpp"

#include <numeric>

namespace mmer {

void TcnConfig::validate() const {
  if (in_dim == 0 || channels == 0 || kernel_size == 0) {
    throw ConfigError("tcn: in_dim, channels and kernel_size must be positive");
  }
  if (dilations.empty()) throw ConfigError("tcn: at least one temporal block is required");
  for (std::size_t d : dilations) {
    if (d < 1) throw ConfigError("tcn: dilations must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("tcn: dropout must lie in [0, 1)");
}

std::size_t TcnConfig::receptive_field() const {
  return 1 + 2 * (kernel_size - 1) * std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
}

template <typename T>
TcnParams<T> init_tcn(ParamStore<T>& store, const std::string& prefix, const TcnConfig& cfg, Rng& rng) {
  cfg.validate();
  TcnParams<T> params;
  std::size_t in = cfg.in_dim;
  for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
    const std::string name = prefix + ".block" + std::to_string(b);
    TemporalBlockParams<T> block;
    block.conv1 = init_conv1d(store, name + ".conv1", in, cfg.channels, cfg.kernel_size, rng);
    block.conv2 = init_conv1d(store, name + ".conv2", cfg.channels, cfg.channels, cfg.kernel_size, rng);
    if (in != cfg.channels) {
      block.downsample = init_conv1d(store, name + ".downsample", in, cfg.channels, 1, rng);
    }
    params.blocks.push_back(std::move(block));
    in = cfg.channels;
  }
  return params;
}

template <typename T>
Tensor<T> temporal_block(const Tensor<T>& x, const TemporalBlockParams<T>& params, std::size_t dilation,
                         const TcnConfig& cfg, const ForwardContext& ctx) {
  Tensor<T> h = conv1d_causal(x, params.conv1, dilation, cfg.kernel_size);
  h = dropout(activate(h, cfg.activation), cfg.dropout, ctx);
  h = conv1d_causal(h, params.conv2, dilation, cfg.kernel_size);
  h = dropout(activate(h, cfg.activation), cfg.dropout, ctx);
  const Tensor<T> residual = params.downsample ? conv1d_causal(x, *params.downsample, 1, 1) : x;
  return add(h, residual);
}

template <typename T>
Tensor<T> tcn_forward(const Tensor<T>& x, const TcnConfig& cfg, const TcnParams<T>& params,
                      const ForwardContext& ctx) {
  if (x.rank() != 2 || x.dim(0) == 0 || x.dim(1) != cfg.in_dim) {
    throw ShapeError("tcn", {x.shape()}, "expected (T x " + std::to_string(cfg.in_dim) + ") with T >= 1");
  }
  if (params.blocks.size() != cfg.dilations.size()) {
    throw ConfigError("tcn: parameter blocks do not match the configured dilations");
  }
  Tensor<T> h = x;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    h = temporal_block(h, params.blocks[b], cfg.dilations[b], cfg, ctx);
  }
  return h;
}

#define MMER_INSTANTIATE_TCN(T)                                                                        \
  template TcnParams<T> init_tcn(ParamStore<T>&, const std::string&, const TcnConfig&, Rng&);          \
  template Tensor<T> temporal_block(const Tensor<T>&, const TemporalBlockParams<T>&, std::size_t,     \
                                    const TcnConfig&, const ForwardContext&);                          \
  template Tensor<T> tcn_forward(const Tensor<T>&, const TcnConfig&, const TcnParams<T>&,             \
                                 const ForwardContext&);

MMER_INSTANTIATE_TCN(float)
MMER_INSTANTIATE_TCN(double)

}  // namespace mmer
