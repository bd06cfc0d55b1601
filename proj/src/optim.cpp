#include "mmer/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mmer {

template <typename T>
bool adamw_step(ParamStore<T>& params, OptimizerState<T>& state, double lr, const AdamWConfig& cfg) {
  const auto& entries = params.entries();
  for (const auto& e : entries) {
    for (T g : e.tensor.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& e : entries) {
      state.first_moment.emplace_back(e.tensor.numel(), T{0});
      state.second_moment.emplace_back(e.tensor.numel(), T{0});
    }
  }
  if (state.first_moment.size() != entries.size()) {
    throw std::logic_error("adamw_step: optimizer state does not match the parameter set");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor<T> tensor = entries[k].tensor;
    auto values = tensor.mutable_data();
    const auto grad = tensor.grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      double p = static_cast<double>(values[i]);
      if (entries[k].decay) p *= decay;
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p -= lr * (mi / correction1) / (std::sqrt(vi / correction2) + cfg.eps);
      values[i] = static_cast<T>(p);
    }
  }
  return true;
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double total = 0.0;
  for (const auto& e : params.entries()) {
    for (T g : e.tensor.grad()) total += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(total);
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (const auto& e : params.entries()) {
      Tensor<T> tensor = e.tensor;
      if (!tensor.has_grad()) continue;
      for (T& g : tensor.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * coef);
    }
  }
  return norm;
}

double cosine_warmup_lr(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double peak_lr) {
  if (total_steps <= warmup_steps) {
    throw std::invalid_argument("cosine_warmup_lr: total_steps " + std::to_string(total_steps) +
                                " must exceed warmup_steps " + std::to_string(warmup_steps));
  }
  if (step > total_steps) throw std::invalid_argument("cosine_warmup_lr: step beyond total_steps");
  if (step < warmup_steps) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  if (step == total_steps) return 0.0;
  return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template bool adamw_step(ParamStore<float>&, OptimizerState<float>&, double, const AdamWConfig&);
template bool adamw_step(ParamStore<double>&, OptimizerState<double>&, double, const AdamWConfig&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

}  // namespace mmer
