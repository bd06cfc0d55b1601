#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mmer/gradcheck.hpp"
#include "mmer/ops.hpp"
#include "support.hpp"

using namespace mmer;
using mmer::test::random_tensor;
using mmer::test::weighted_sum;

using T = Tensor<double>;

TEST(TensorTest, ConstructionAndAccessors) {
  const T x = T::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(x.rank(), 2u);
  EXPECT_EQ(x.numel(), 6u);
  EXPECT_EQ(x.at(1, 2), 6.0);
  EXPECT_FALSE(x.requires_grad());
  EXPECT_TRUE(x.is_leaf());
  EXPECT_FALSE(x.has_grad());
  EXPECT_EQ(T::scalar(2.5).item(), 2.5);
  EXPECT_THROW(T::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(x.item(), ShapeError);
}

TEST(TensorTest, ShapeErrorNamesPrimitiveAndShapes) {
  const T a = T::zeros({2, 3});
  const T b = T::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.primitive(), "matmul");
    ASSERT_EQ(e.shapes().size(), 2u);
    EXPECT_EQ(e.shapes()[0], (Shape{2, 3}));
    EXPECT_EQ(e.shapes()[1], (Shape{4, 5}));
  }
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(concat<double>({a, b}, 1), ShapeError);
}

TEST(TensorTest, MatmulIdentity) {
  const T a = T::from({2, 2}, {1, 2, 3, 4});
  const T eye = T::from({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(test::to_vector(matmul(a, eye)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(TensorTest, MatmulMatchesNaiveLoop) {
  std::mt19937_64 rng(1);
  const T a = random_tensor({3, 5}, rng, false);
  const T b = random_tensor({5, 4}, rng, false);
  const T c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), acc, 1e-12);
    }
  }
}

TEST(TensorTest, SoftmaxOfZerosIsUniform) {
  const T y = softmax(T::zeros({3}), 0);
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(TensorTest, SoftmaxIsStableForLargeLogits) {
  const T y = softmax(T::from({1, 3}, {1000.0, 1000.0, -1000.0}), 1);
  EXPECT_NEAR(y.data()[0], 0.5, 1e-15);
  EXPECT_NEAR(y.data()[2], 0.0, 1e-15);
}

TEST(TensorTest, ConcatAxisOneShape) {
  const T y = concat<double>({T::zeros({2, 3}), T::full({2, 5}, 1.0)}, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 8}));
  EXPECT_EQ(y.at(1, 2), 0.0);
  EXPECT_EQ(y.at(1, 3), 1.0);
}

TEST(TensorTest, ConvValidWithDilationAndStride) {
  // Single channel, kernel [1, 10]: y[t] = x[t*s] + 10 x[t*s + d].
  const T x = T::from({6, 1}, {1, 2, 3, 4, 5, 6});
  const T k = T::from({1, 1, 2}, {1, 10});
  EXPECT_EQ(test::to_vector(conv1d(x, k, 2, 1)), (std::vector<double>{31, 42, 53, 64}));
  EXPECT_EQ(test::to_vector(conv1d(x, k, 1, 2)), (std::vector<double>{21, 43, 65}));
}

// ---- backward ---------------------------------------------------------------

TEST(AutogradTest, SquareGradient) {
  T x = T::from({1}, {3.0}, true);
  sum_all(mul(x, x)).backward();
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(AutogradTest, SumGradientIsOnes) {
  T x = T::zeros({2, 2}, true);
  sum_all(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(AutogradTest, ReluGate) {
  T x = T::from({2}, {-1.0, 2.0}, true);
  sum_all(relu(x)).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(AutogradTest, SharedSubexpressionAccumulates) {
  T x = T::from({1}, {2.0}, true);
  const T y = mul(x, x);
  sum_all(add(y, y)).backward();  // d(2x^2)/dx = 4x
  EXPECT_EQ(x.grad()[0], 8.0);
}

TEST(AutogradTest, LeafGradsAccumulateAcrossBackwardCalls) {
  T x = T::from({1}, {2.0}, true);
  sum_all(scale(x, 3.0)).backward();
  sum_all(scale(x, 3.0)).backward();
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(AutogradTest, BackwardRequiresScalarGraphRoot) {
  T x = T::zeros({2}, true);
  EXPECT_THROW(relu(x).backward(), ShapeError);
  EXPECT_THROW(sum_all(T::zeros({2})).backward(), std::logic_error);
}

TEST(AutogradTest, NoGradGuardRecordsNothing) {
  T x = T::zeros({2}, true);
  {
    NoGradGuard guard;
    const T y = relu(x);
    EXPECT_TRUE(y.is_leaf());
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_FALSE(relu(x).is_leaf());
}

TEST(AutogradTest, DetachCutsTheGraph) {
  T x = T::from({1}, {2.0}, true);
  const T y = mul(x, x.detach());
  sum_all(y).backward();
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(AutogradTest, StrictModeRejectsNonFiniteInputs) {
  const T bad = T::from({2}, {1.0, std::nan("")});
  EXPECT_NO_THROW(relu(bad));
  StrictModeGuard strict;
  EXPECT_THROW(relu(bad), NonFiniteError);
}

TEST(AutogradTest, GradientLinearity) {
  // grad(a f + b g) == a grad(f) + b grad(g)
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    T x = random_tensor({3, 4}, rng);
    const auto f = [&] { return sum_all(mul(tanh(x), x)); };
    const auto g = [&] { return sum_all(softmax(x, 1)) + sum_all(mul(sigmoid(x), sigmoid(x))); };
    const double a = std::uniform_real_distribution<double>(-2, 2)(rng);
    const double b = std::uniform_real_distribution<double>(-2, 2)(rng);

    f().backward();
    const auto gf = test::to_vector(T::from(x.shape(), {x.grad().begin(), x.grad().end()}));
    x.zero_grad();
    g().backward();
    const auto gg = test::to_vector(T::from(x.shape(), {x.grad().begin(), x.grad().end()}));
    x.zero_grad();
    add(scale(f(), a), scale(g(), b)).backward();
    for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_NEAR(x.grad()[i], a * gf[i] + b * gg[i], 1e-12);
  }
}

TEST(AutogradTest, ForwardIsDeterministic) {
  std::mt19937_64 rng(3);
  const T a = random_tensor({4, 6}, rng, false);
  const T b = random_tensor({6, 5}, rng, false);
  const auto y1 = test::to_vector(softmax(matmul(a, b), 1));
  const auto y2 = test::to_vector(softmax(matmul(a, b), 1));
  EXPECT_EQ(y1, y2);
}

// ---- shape algebra over random shapes ------------------------------------

TEST(ShapeAlgebraTest, OutputShapesDependOnlyOnInputShapes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> extent(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = extent(rng), k = extent(rng), n = extent(rng);
    const T a = random_tensor({m, k}, rng, false);
    const T b = random_tensor({k, n}, rng, false);
    EXPECT_EQ(matmul(a, b).shape(), (Shape{m, n}));
    EXPECT_EQ(transpose(a).shape(), (Shape{k, m}));
    EXPECT_EQ(add(a, random_tensor({k}, rng, false)).shape(), (Shape{m, k}));
    EXPECT_EQ(mul(a, random_tensor({m, 1}, rng, false)).shape(), (Shape{m, k}));
    EXPECT_EQ(sum(a, 0).shape(), (Shape{k}));
    EXPECT_EQ(mean(a, 1, true).shape(), (Shape{m, 1}));
    EXPECT_EQ(softmax(a, 1).shape(), a.shape());
    EXPECT_EQ(pad(a, 0, 2, 1).shape(), (Shape{m + 3, k}));
    EXPECT_EQ(slice(a, 1, 0, k).shape(), a.shape());
    EXPECT_EQ(reshape(a, {k, m}).shape(), (Shape{k, m}));
    EXPECT_EQ(concat<double>({a, a}, 0).shape(), (Shape{2 * m, k}));
    const std::size_t taps = extent(rng) % 3 + 1, dil = extent(rng) % 2 + 1;
    const std::size_t span = (taps - 1) * dil + 1;
    const T x = random_tensor({span + m, k}, rng, false);
    EXPECT_EQ(conv1d(x, random_tensor({n, k, taps}, rng, false), dil).shape(), (Shape{m + 1, n}));
  }
}

// ---- per-primitive finite-difference checks ------------------------------

class PrimitiveGradTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng{2024};
};

TEST_F(PrimitiveGradTest, Elementwise) {
  T a = random_tensor({3, 4}, rng);
  T b = random_tensor({3, 4}, rng);
  T row = random_tensor({4}, rng);
  T col = random_tensor({3, 1}, rng);
  T s = random_tensor({1}, rng);
  T pos = T::from({3, 4}, std::vector<double>(12, 0.0), true);
  for (std::size_t i = 0; i < 12; ++i) pos.mutable_data()[i] = 0.5 + std::abs(a.data()[i]);
  const auto loss = [&] {
    T y = add(mul(a, b), row);
    y = sub(y, col);
    y = mul(y, s);
    y = add(y, scale(exp(scale(a, 0.3)), 0.5));
    y = add(y, log(pos));
    y = add(y, sigmoid(b));
    y = add(y, tanh(a));
    y = add(y, gelu(b));
    y = add_scalar(y, 1.5);
    return weighted_sum(y);
  };
  test::expect_gradients_match(loss, {{"a", a}, {"b", b}, {"row", row}, {"col", col}, {"s", s}, {"pos", pos}}, 1e-6);
}

TEST_F(PrimitiveGradTest, StructuralOps) {
  T a = random_tensor({4, 3}, rng);
  T b = random_tensor({3, 5}, rng);
  T c = random_tensor({4, 2}, rng);
  const std::vector<std::size_t> rows{3, 0, 0, 2};
  const auto loss = [&] {
    T y = matmul(a, b);
    y = concat<double>({y, c}, 1);
    y = add(slice(y, 1, 1, 4), broadcast_to(reshape(slice(c, 1, 0, 1), {4, 1}), {4, 4}));
    y = gather_rows(y, std::span<const std::size_t>(rows));
    y = mask_apply(y, std::vector<double>{1, 0, 2, 1, 1, 1, 0, 1, 1, 1, 1, 3, 1, 1, 1, 1});
    y = pad(transpose(y), 0, 1, 2, 0.25);
    y = add(softmax(y, 1), sum(y, 0));
    return add(weighted_sum(y), add(mean_all(mean(y, 1)), sum_all(sum(y, 0))));
  };
  test::expect_gradients_match(loss, {{"a", a}, {"b", b}, {"c", c}}, 1e-6);
}

TEST_F(PrimitiveGradTest, Convolution) {
  T x = random_tensor({9, 3}, rng);
  T k = random_tensor({2, 3, 3}, rng);
  const auto loss = [&] { return add(weighted_sum(conv1d(x, k, 2, 1)), weighted_sum(conv1d(x, k, 1, 3), 5)); };
  test::expect_gradients_match(loss, {{"x", x}, {"kernel", k}}, 1e-6);
}

TEST_F(PrimitiveGradTest, ReluAwayFromKink) {
  T x = random_tensor({5, 2}, rng);
  for (double& v : x.mutable_data()) v += v >= 0 ? 0.1 : -0.1;
  test::expect_gradients_match([&] { return weighted_sum(relu(x)); }, {{"x", x}}, 1e-8);
}

// ---- the checker on itself -----------------------------------------------

TEST(GradCheckTest, QuadraticIsExactUpToRoundoff) {
  std::mt19937_64 rng(5);
  T x = random_tensor({6}, rng);
  const auto report = finite_diff_check([&] { return add(sum_all(mul(x, x)), scale(sum_all(x), 3.0)); },
                                        {{"x", x}}, GradCheckOptions{1e-5});
  EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(GradCheckTest, LinearLayerWithSquaredError) {
  std::mt19937_64 rng(6);
  const T x = random_tensor({5, 4}, rng, false);
  const T target = random_tensor({5, 3}, rng, false);
  T w = random_tensor({4, 3}, rng);
  T b = random_tensor({3}, rng);
  const auto loss = [&] {
    const T d = sub(add(matmul(x, w), b), target);
    return mean_all(mul(d, d));
  };
  EXPECT_LT(finite_diff_check(loss, {{"w", w}, {"b", b}}).max_rel_error, 1e-6);
}

TEST(GradCheckTest, DetectsAWrongGradient) {
  // detach() hides half of the true derivative, so the check must fail.
  T x = T::from({1}, {1.5}, true);
  const auto report = finite_diff_check([&] { return sum_all(mul(x, x.detach())); }, {{"x", x}});
  EXPECT_GT(report.max_rel_error, 0.4);
}

TEST(GradCheckTest, NonFiniteLossThrows) {
  T x = T::from({1}, {-1.0}, true);
  EXPECT_THROW(finite_diff_check([&] { return sum_all(log(x)); }, {{"x", x}}), NonFiniteError);
}
