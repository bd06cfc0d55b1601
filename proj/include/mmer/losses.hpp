#pragma once

#include <span>
#include <vector>

#include "mmer/tensor.hpp"

namespace mmer {

/// Per-frame participation flag; true frames enter losses and metrics.
using ValidityMask = std::vector<bool>;

/// 1 - (CCC_valence + CCC_arousal) / 2 over valid frames, population
/// statistics. pred and gt are (T x 2); needs at least two valid frames.
template <typename T>
Tensor<T> va_loss(const Tensor<T>& pred, const Tensor<T>& gt, const ValidityMask& mask);

/// Mean over valid frames of -log softmax(logits)[label]. logits: (T x M).
template <typename T>
Tensor<T> expr_loss(const Tensor<T>& logits, std::span<const int> labels, const ValidityMask& mask);

/// Mean over valid (frame, unit) pairs of binary cross-entropy on logits,
/// in the overflow-free form max(x,0) - x y + log(1 + exp(-|x|)).
/// labels: row-major (T x U) values in {0,1}.
template <typename T>
Tensor<T> au_loss(const Tensor<T>& logits, std::span<const int> labels, const ValidityMask& mask);

}  // namespace mmer
