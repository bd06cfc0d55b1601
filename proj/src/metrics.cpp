#include "mmer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mmer {

double ccc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("ccc: sequences differ in length");
  if (x.empty()) throw std::invalid_argument("ccc: empty sequences");
  const double n = static_cast<double>(x.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;
  double var_x = 0.0, var_y = 0.0, cov = 0.0, max_gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    var_x += dx * dx;
    var_y += dy * dy;
    cov += dx * dy;
    max_gap = std::max(max_gap, std::abs(x[i] - y[i]));
  }
  var_x /= n;
  var_y /= n;
  cov /= n;
  const double denom = var_x + var_y + (mean_x - mean_y) * (mean_x - mean_y);
  if (denom < 1e-12) return max_gap < 1e-12 ? 1.0 : 0.0;
  return 2.0 * cov / denom;
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

double f1(const Counts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

F1Report summarize(const std::vector<Counts>& counts) {
  F1Report report;
  for (const auto& c : counts) report.per_class.push_back(f1(c));
  double total = 0.0;
  for (double v : report.per_class) total += v;
  report.macro = counts.empty() ? 0.0 : total / static_cast<double>(counts.size());
  return report;
}

void check_mask(const char* name, std::size_t rows, const ValidityMask& mask) {
  if (mask.size() != rows) {
    throw std::invalid_argument(std::string(name) + ": mask length " + std::to_string(mask.size()) +
                                " differs from " + std::to_string(rows) + " frames");
  }
}

}  // namespace

F1Report macro_f1(std::span<const int> pred, std::span<const int> gt, std::size_t n_classes,
                  const ValidityMask& mask) {
  if (pred.size() != gt.size()) throw std::invalid_argument("macro_f1: prediction/label length mismatch");
  check_mask("macro_f1", gt.size(), mask);
  std::vector<Counts> counts(n_classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    const int p = pred[i], g = gt[i];
    const auto in_range = [n_classes](int v) { return v >= 0 && static_cast<std::size_t>(v) < n_classes; };
    if (!in_range(p) || !in_range(g)) {
      throw std::invalid_argument("macro_f1: label out of range at frame " + std::to_string(i));
    }
    if (p == g) {
      ++counts[static_cast<std::size_t>(p)].tp;
    } else {
      ++counts[static_cast<std::size_t>(p)].fp;
      ++counts[static_cast<std::size_t>(g)].fn;
    }
  }
  return summarize(counts);
}

F1Report multilabel_f1(std::span<const double> scores, std::span<const int> gt, std::size_t n_units,
                       const ValidityMask& mask, double threshold, ScoreKind kind) {
  if (n_units == 0 || scores.size() != gt.size() || gt.size() % n_units != 0) {
    throw std::invalid_argument("multilabel_f1: score/label sizes do not form (T x units) matrices");
  }
  const std::size_t rows = gt.size() / n_units;
  check_mask("multilabel_f1", rows, mask);
  std::vector<Counts> counts(n_units);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (std::size_t u = 0; u < n_units; ++u) {
      const int g = gt[r * n_units + u];
      if (g != 0 && g != 1) {
        throw std::invalid_argument("multilabel_f1: non-binary label at frame " + std::to_string(r));
      }
      const double s = scores[r * n_units + u];
      const double prob = kind == ScoreKind::kLogits ? 1.0 / (1.0 + std::exp(-s)) : s;
      const bool fired = prob >= threshold;
      if (fired && g == 1) ++counts[u].tp;
      if (fired && g == 0) ++counts[u].fp;
      if (!fired && g == 1) ++counts[u].fn;
    }
  }
  return summarize(counts);
}

double MetricReport::get(const std::string& name) const {
  for (const auto& [k, v] : values) {
    if (k == name) return v;
  }
  throw std::out_of_range("metric '" + name + "' not in report");
}

namespace {

std::string six(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "Metrics (" << task << ")\n";
  for (const auto& [k, v] : values) os << "  " << k << ": " << six(v) << '\n';
  return os.str();
}

std::string MetricReport::to_kv() const {
  std::ostringstream os;
  os << "task=" << task << '\n';
  for (const auto& [k, v] : values) os << k << '=' << six(v) << '\n';
  return os.str();
}

}  // namespace mmer
