#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "mmer/gradcheck.hpp"
#include "mmer/ops.hpp"

namespace mmer::test {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = normal(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> to_vector(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

// Fixed random weights turn any tensor function into a scalar loss whose
// gradient exercises every output element.
inline Tensor<double> weighted_sum(const Tensor<double>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum_all(mul(y, random_tensor(y.shape(), rng, false)));
}

inline void expect_gradients_match(const std::function<Tensor<double>()>& loss,
                                   const std::vector<NamedTensor<double>>& params, double tol = 1e-4,
                                   GradCheckOptions options = {}) {
  const GradientReport report = finite_diff_check(loss, params, options);
  EXPECT_LT(report.max_rel_error, tol);
  for (const auto& p : report.params) EXPECT_LT(p.max_rel_error, tol) << p.name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mmer_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace mmer::test
