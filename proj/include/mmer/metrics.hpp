#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmer/losses.hpp"

namespace mmer {

/// Concordance correlation coefficient with population (1/N) moments.
/// When the denominator falls below 1e-12 the result is 1 if the
/// sequences agree to within 1e-12 everywhere and 0 otherwise.
double ccc(std::span<const double> x, std::span<const double> y);

struct F1Report {
  double macro = 0.0;
  std::vector<double> per_class;
};

/// Unweighted mean of per-class F1 over valid frames. A class with no
/// predicted and no actual positives scores 0.
F1Report macro_f1(std::span<const int> pred, std::span<const int> gt, std::size_t n_classes,
                  const ValidityMask& mask);

enum class ScoreKind { kLogits, kProbabilities };

/// Per-unit binary F1, macro-averaged. A unit fires when its probability
/// (sigmoid of the logit for kLogits) is >= threshold.
/// scores and gt are row-major (T x n_units).
F1Report multilabel_f1(std::span<const double> scores, std::span<const int> gt, std::size_t n_units,
                       const ValidityMask& mask, double threshold = 0.5,
                       ScoreKind kind = ScoreKind::kLogits);

/// Named metric values, printable as prose or as key=value lines with
/// six decimals.
struct MetricReport {
  std::string task;
  std::vector<std::pair<std::string, double>> values;

  void add(std::string name, double value) { values.emplace_back(std::move(name), value); }
  double get(const std::string& name) const;
  std::string to_text() const;
  std::string to_kv() const;
};

}  // namespace mmer
