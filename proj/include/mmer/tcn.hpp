#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmer/layers.hpp"

namespace mmer {

struct TcnConfig {
  std::size_t in_dim = 0;
  std::size_t channels = 256;
  std::size_t kernel_size = 3;
  std::vector<std::size_t> dilations{1, 2, 4};  // one temporal block per entry
  double dropout = 0.3;
  Activation activation = Activation::kRelu;

  void validate() const;
  /// 1 + 2 (k - 1) sum(dilations): frames of history each output sees.
  std::size_t receptive_field() const;
};

template <typename T>
struct TemporalBlockParams {
  Conv1dParams<T> conv1;
  Conv1dParams<T> conv2;
  std::optional<Conv1dParams<T>> downsample;  // 1x1 projection when C_in != channels
};

template <typename T>
struct TcnParams {
  std::vector<TemporalBlockParams<T>> blocks;
};

template <typename T>
TcnParams<T> init_tcn(ParamStore<T>& store, const std::string& prefix, const TcnConfig& cfg, Rng& rng);

/// conv -> act -> dropout -> conv -> act -> dropout, added to the (projected) input.
template <typename T>
Tensor<T> temporal_block(const Tensor<T>& x, const TemporalBlockParams<T>& params, std::size_t dilation,
                         const TcnConfig& cfg, const ForwardContext& ctx);

template <typename T>
Tensor<T> tcn_forward(const Tensor<T>& x, const TcnConfig& cfg, const TcnParams<T>& params,
                      const ForwardContext& ctx);

}  // namespace mmer
