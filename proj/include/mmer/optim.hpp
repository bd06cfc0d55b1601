#pragma once

#include <cstdint>
#include <vector>

#include "mmer/layers.hpp"

namespace mmer {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step = 0;
};

/// One AdamW update over every parameter in `params`, reading their grads.
/// Decoupled decay p *= (1 - lr * wd) applies only to entries flagged
/// `decay`. Returns false, leaving params and state untouched, when any
/// gradient is non-finite.
template <typename T>
bool adamw_step(ParamStore<T>& params, OptimizerState<T>& state, double lr, const AdamWConfig& cfg);

/// Scales all grads by min(1, max_norm / (norm + 1e-6)); returns the
/// global L2 norm measured before scaling.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

/// Linear warmup from 0 to peak_lr over [0, warmup_steps), then half-cosine
/// decay reaching 0 at total_steps.
double cosine_warmup_lr(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double peak_lr);

}  // namespace mmer
