#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer {

struct ParamGradError {
  std::string name;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradientReport {
  std::vector<ParamGradError> params;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::chrono::duration<double> elapsed{0.0};
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, rel_floor),
  // so gradients near zero are judged on an absolute scale.
  double rel_floor = 1e-5;
};

/// Compares the analytic gradient of `loss_fn` with central differences
/// (f(p + eps) - f(p - eps)) / (2 eps) for every element of every parameter.
/// `loss_fn` must be deterministic and rebuild its graph on each call.
GradientReport finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                 const std::vector<NamedTensor<double>>& params,
                                 GradCheckOptions options = {});

}  // namespace mmer
