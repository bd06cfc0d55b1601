#include "mmer/losses.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mmer/ops.hpp"

namespace mmer {

namespace {

std::vector<std::size_t> valid_rows(const char* name, std::size_t rows, const ValidityMask& mask) {
  if (mask.size() != rows) {
    throw std::invalid_argument(std::string(name) + ": mask length " + std::to_string(mask.size()) +
                                " differs from " + std::to_string(rows) + " frames");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows; ++i) {
    if (mask[i]) idx.push_back(i);
  }
  return idx;
}

template <typename T>
void require_rank2(const char* name, const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError(name, {t.shape()}, "expected a (T x D) tensor");
}

}  // namespace

template <typename T>
Tensor<T> va_loss(const Tensor<T>& pred, const Tensor<T>& gt, const ValidityMask& mask) {
  require_rank2("va_loss", pred);
  if (pred.shape() != gt.shape() || pred.dim(1) != 2) {
    throw ShapeError("va_loss", {pred.shape(), gt.shape()}, "expected matching (T x 2) tensors");
  }
  const auto idx = valid_rows("va_loss", pred.dim(0), mask);
  if (idx.size() < 2) {
    throw std::invalid_argument("va_loss: needs at least 2 valid frames, got " + std::to_string(idx.size()));
  }
  const Tensor<T> p = gather_rows(pred, std::span<const std::size_t>(idx));
  const Tensor<T> g = gather_rows(gt, std::span<const std::size_t>(idx));
  const Tensor<T> mean_p = mean(p, 0);
  const Tensor<T> mean_g = mean(g, 0);
  const Tensor<T> dp = sub(p, mean_p);
  const Tensor<T> dg = sub(g, mean_g);
  const Tensor<T> var_p = mean(mul(dp, dp), 0);
  const Tensor<T> var_g = mean(mul(dg, dg), 0);
  const Tensor<T> cov = mean(mul(dp, dg), 0);
  const Tensor<T> gap = sub(mean_p, mean_g);
  const Tensor<T> denom = add(add(var_p, var_g), mul(gap, gap));
  // 2 cov / denom, with the reciprocal as exp(-log(denom)).
  const Tensor<T> ccc = mul(scale(cov, T{2}), exp(scale(log(denom), T{-1})));
  return add_scalar(scale(mean_all(ccc), T{-1}), T{1});
}

template <typename T>
Tensor<T> expr_loss(const Tensor<T>& logits, std::span<const int> labels, const ValidityMask& mask) {
  require_rank2("expr_loss", logits);
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != rows) {
    throw std::invalid_argument("expr_loss: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(rows) + " frames");
  }
  const auto idx = valid_rows("expr_loss", rows, mask);
  if (idx.empty()) throw std::invalid_argument("expr_loss: no valid frames");
  std::vector<T> onehot(idx.size() * classes, T{0});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const int label = labels[idx[r]];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::invalid_argument("expr_loss: label " + std::to_string(label) + " out of range at frame " +
                                  std::to_string(idx[r]));
    }
    onehot[r * classes + static_cast<std::size_t>(label)] = T{1};
  }
  const Tensor<T> x = gather_rows(logits, std::span<const std::size_t>(idx));
  // Row maxima as constants: log-sum-exp is shift invariant, so the shift
  // carries no gradient.
  std::vector<T> peaks(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto row = x.data().subspan(r * classes, classes);
    peaks[r] = *std::max_element(row.begin(), row.end());
  }
  const Tensor<T> z = sub(x, Tensor<T>::from({idx.size(), 1}, std::move(peaks)));
  const Tensor<T> lse = log(sum(exp(z), 1, true));
  const Tensor<T> picked = sum(mul(z, Tensor<T>::from({idx.size(), classes}, std::move(onehot))), 1, true);
  return mean_all(sub(lse, picked));
}

template <typename T>
Tensor<T> au_loss(const Tensor<T>& logits, std::span<const int> labels, const ValidityMask& mask) {
  require_rank2("au_loss", logits);
  const std::size_t rows = logits.dim(0), units = logits.dim(1);
  if (labels.size() != rows * units) {
    throw std::invalid_argument("au_loss: expected " + std::to_string(rows * units) + " labels, got " +
                                std::to_string(labels.size()));
  }
  const auto idx = valid_rows("au_loss", rows, mask);
  if (idx.empty()) throw std::invalid_argument("au_loss: no valid frames");
  std::vector<T> targets(idx.size() * units);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t u = 0; u < units; ++u) {
      const int y = labels[idx[r] * units + u];
      if (y != 0 && y != 1) {
        throw std::invalid_argument("au_loss: non-binary label " + std::to_string(y) + " at frame " +
                                    std::to_string(idx[r]) + ", unit " + std::to_string(u));
      }
      targets[r * units + u] = static_cast<T>(y);
    }
  }
  const Tensor<T> x = gather_rows(logits, std::span<const std::size_t>(idx));
  // max(x,0) and |x| as products with constant gate/sign masks; at x == 0
  // this yields the exact derivative sigmoid(0) - y.
  std::vector<T> gate(x.numel()), sign(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const bool nonneg = x.data()[i] >= T{0};
    gate[i] = nonneg ? T{1} : T{0};
    sign[i] = nonneg ? T{1} : T{-1};
  }
  const Tensor<T> positive_part = mask_apply(x, std::move(gate));
  const Tensor<T> magnitude = mask_apply(x, std::move(sign));
  const Tensor<T> softplus_tail = log(add_scalar(exp(scale(magnitude, T{-1})), T{1}));
  const Tensor<T> y = Tensor<T>::from({idx.size(), units}, std::move(targets));
  return mean_all(add(sub(positive_part, mul(x, y)), softplus_tail));
}

#define MMER_INSTANTIATE_LOSSES(T)                                                             \
  template Tensor<T> va_loss(const Tensor<T>&, const Tensor<T>&, const ValidityMask&);         \
  template Tensor<T> expr_loss(const Tensor<T>&, std::span<const int>, const ValidityMask&);   \
  template Tensor<T> au_loss(const Tensor<T>&, std::span<const int>, const ValidityMask&);

MMER_INSTANTIATE_LOSSES(float)
MMER_INSTANTIATE_LOSSES(double)

}  // namespace mmer
