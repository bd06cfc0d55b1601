#include "mmer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mmer {

namespace {

double evaluate(const std::function<Tensor<double>()>& loss_fn) {
  NoGradGuard no_grad;
  const double value = loss_fn().item();
  if (!std::isfinite(value)) throw NonFiniteError("finite_diff_check: loss is not finite");
  return value;
}

}  // namespace

GradientReport finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                 const std::vector<NamedTensor<double>>& params,
                                 GradCheckOptions options) {
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::vector<double>> analytic;
  {
    std::vector<NamedTensor<double>> handles = params;
    for (auto& p : handles) p.tensor.zero_grad();
    Tensor<double> loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NonFiniteError("finite_diff_check: loss is not finite");
    loss.backward();
    for (const auto& p : handles) {
      if (p.tensor.has_grad()) {
        analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      } else {
        analytic.emplace_back(p.tensor.numel(), 0.0);
      }
    }
  }

  GradientReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double> tensor = params[k].tensor;
    auto values = tensor.mutable_data();
    ParamGradError err{params[k].name};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = evaluate(loss_fn);
      values[i] = saved - options.eps;
      const double down = evaluate(loss_fn);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double abs_err = std::abs(analytic[k][i] - numeric);
      const double denom = std::max({std::abs(analytic[k][i]), std::abs(numeric), options.rel_floor});
      err.max_abs_error = std::max(err.max_abs_error, abs_err);
      err.max_rel_error = std::max(err.max_rel_error, abs_err / denom);
    }
    report.max_abs_error = std::max(report.max_abs_error, err.max_abs_error);
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    report.params.push_back(std::move(err));
  }
  report.elapsed = std::chrono::steady_clock::now() - start;
  return report;
}

}  // namespace mmer
