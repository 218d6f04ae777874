#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coclust/adam.hpp"
#include "coclust/error.hpp"
#include "coclust/gradcheck.hpp"
#include "coclust/ops.hpp"
#include "coclust/tape.hpp"
#include "coclust/transformer.hpp"

using namespace coclust;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(r, c);
  for (double& x : t.storage()) x = n(rng);
  return t;
}

}  // namespace

TEST(Softmax, Examples) {
  auto a = ops::softmax(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  auto b = ops::softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  EXPECT_NEAR(b[0], 0.25, 1e-15);
  EXPECT_NEAR(b[1], 0.75, 1e-15);
  auto c = ops::softmax(std::vector<double>{5.0});
  EXPECT_DOUBLE_EQ(c[0], 1.0);
}

TEST(Softmax, RejectsNaN) {
  EXPECT_THROW(ops::softmax(std::vector<double>{0.0, std::nan("")}), NumericalError);
}

TEST(Softmax, LargeLogitsStayFinite) {
  auto p = ops::softmax(std::vector<double>{1000.0, 1001.0});
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(LayerNorm, Examples) {
  std::vector<double> one{1.0, 1.0}, zero{0.0, 0.0};
  auto y = ops::layer_norm(std::vector<double>{1.0, 3.0}, one, zero);
  // mean 2, population variance 1
  const double s = 1.0 / std::sqrt(1.0 + ops::kLayerNormEps);
  EXPECT_NEAR(y[0], -s, 1e-15);
  EXPECT_NEAR(y[1], s, 1e-15);

  std::vector<double> bias{0.3, -0.7};
  auto c = ops::layer_norm(std::vector<double>{4.0, 4.0}, one, bias);
  EXPECT_DOUBLE_EQ(c[0], 0.3);
  EXPECT_DOUBLE_EQ(c[1], -0.7);

  EXPECT_THROW(ops::layer_norm(std::vector<double>{1.0, 2.0, 3.0}, one, zero), UsageError);
}

TEST(LayerNorm, ShiftInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(7), g(7), b(7), shifted(7);
    for (std::size_t i = 0; i < 7; ++i) {
      v[i] = n(rng);
      g[i] = n(rng);
      b[i] = n(rng);
    }
    const double c = n(rng) * 10.0;
    for (std::size_t i = 0; i < 7; ++i) shifted[i] = v[i] + c;
    auto y1 = ops::layer_norm(v, g, b);
    auto y2 = ops::layer_norm(shifted, g, b);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-9);
  }
}

TEST(SoftmaxRows, PermutationEquivariant) {
  std::mt19937_64 rng(5);
  Tensor x = random_matrix(3, 6, rng);
  std::vector<std::size_t> perm{4, 1, 5, 0, 3, 2};
  Tensor xp = Tensor::matrix(3, 6);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 6; ++j) xp(r, j) = x(r, perm[j]);
  Tape t;
  const Tensor y = t.value(ops::softmax_rows(t, t.constant(x)));
  const Tensor yp = t.value(ops::softmax_rows(t, t.constant(xp)));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(yp(r, j), y(r, perm[j]), 1e-15);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(std::vector<double>{1.0}, std::vector<double>{1.0}), 0.0, 1e-11);
  EXPECT_NEAR(bce_loss(std::vector<double>{0.5}, std::vector<double>{1.0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}),
              std::log(2.0), 1e-15);
  EXPECT_THROW(bce_loss(std::vector<double>{0.5}, std::vector<double>{0.5}), DataError);
  EXPECT_TRUE(std::isfinite(bce_loss(std::vector<double>{0.0}, std::vector<double>{1.0})));
}

TEST(Tape, BackwardAccumulatesIntoParameters) {
  Tensor a = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  a.set_requires_grad(true);
  Tape t;
  Var va = t.parameter(a);
  Var loss = ops::add(t, ops::sum(t, va), ops::sum(t, ops::scale(t, va, 2.0)));
  t.backward(loss);
  for (double g : a.grad()) EXPECT_DOUBLE_EQ(g, 3.0);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tensor a = Tensor::matrix(1, 3, 1.0);
  Tape t;
  Var c = t.constant(a);
  EXPECT_FALSE(t.needs_grad(c));
  t.backward(ops::sum(t, c));
  EXPECT_FALSE(a.has_grad());
}

TEST(Tape, BackwardNeedsScalar) {
  Tape t;
  Var c = t.constant(Tensor::matrix(1, 2, 1.0));
  EXPECT_THROW(t.backward(c), UsageError);
}

TEST(Matmul, ShapeMismatchThrows) {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 3));
  Var b = t.constant(Tensor::matrix(2, 3));
  EXPECT_THROW(ops::matmul(t, a, b), UsageError);
}

TEST(SegmentMean, EmptySegmentGivesZeros) {
  Segments s;
  s.append(std::vector<std::size_t>{0, 2});
  s.append(std::vector<std::size_t>{});
  Tape t;
  Var x = t.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  const Tensor y = t.value(ops::segment_mean(t, x, s));
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(y(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(1, 1), 0.0);
}

TEST(Dropout, ZeroRateIsIdentityAndDrawsNothing) {
  std::mt19937_64 rng(9), ref(9);
  Tape t;
  Tensor x = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor y = t.value(ops::dropout(t, t.constant(x), 0.0, rng));
  EXPECT_EQ(y.storage(), x.storage());
  EXPECT_EQ(rng(), ref());
}

TEST(GradCheck, SquareAtThree) {
  Tensor x = Tensor::matrix(1, 1, 3.0);
  x.set_requires_grad(true);
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    return ops::matmul(t, v, v);
  };
  GradCheckReport r = grad_check(f, {{"x", &x}});
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.worst.analytic, 6.0, 1e-12);
  EXPECT_NEAR(r.worst.numeric, 6.0, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_DOUBLE_EQ(x(0, 0), 3.0);
}

TEST(GradCheck, ConstantLoss) {
  Tensor x = Tensor::matrix(1, 2, 1.5);
  x.set_requires_grad(true);
  auto f = [&](Tape& t) {
    t.parameter(x);
    return t.constant(Tensor::matrix(1, 1, 2.0));
  };
  GradCheckReport r = grad_check(f, {{"x", &x}});
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.coordinates, 2u);
  EXPECT_EQ(r.worst.analytic, 0.0);
  EXPECT_EQ(r.worst.numeric, 0.0);
}

TEST(GradCheck, ReluAtZeroIsKink) {
  Tensor x = Tensor::matrix(1, 2, {0.0, 1.0});
  x.set_requires_grad(true);
  auto f = [&](Tape& t) { return ops::sum(t, ops::relu(t, t.parameter(x))); };
  GradCheckReport r = grad_check(f, {{"x", &x}});
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.kinks, 1u);
  ASSERT_EQ(r.kink_coordinates.size(), 1u);
  EXPECT_EQ(r.kink_coordinates[0].index, 0u);
}

TEST(GradCheck, DetectsNondeterministicLoss) {
  Tensor x = Tensor::matrix(1, 1, 1.0);
  x.set_requires_grad(true);
  int calls = 0;
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    return ops::scale(t, v, 1.0 + 0.1 * (calls++));
  };
  EXPECT_THROW(grad_check(f, {{"x", &x}}), NumericalError);
}

TEST(GradCheck, CatchesWrongGradient) {
  Tensor x = Tensor::matrix(1, 1, 2.0);
  x.set_requires_grad(true);
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    // Value x^2 but the recorded derivative is x instead of 2x.
    Tensor y = Tensor::matrix(1, 1, t.value(v)[0] * t.value(v)[0]);
    return t.push(y, {v}, [v](Tape& tape, Var self) {
      tape.grad(v)[0] += tape.grad(self)[0] * tape.value(v)[0];
    });
  };
  GradCheckReport r = grad_check(f, {{"x", &x}});
  EXPECT_FALSE(r.passed);
}

TEST(Adam, FirstStepIsMinusLrTimesSign) {
  Tensor x = Tensor::matrix(1, 1, 0.0);
  x.set_requires_grad(true);
  Adam opt({{"x", &x}}, {.learning_rate = 1e-3});
  Tape t;
  t.backward(ops::sum(t, t.parameter(x)));
  opt.step();
  EXPECT_NEAR(x(0, 0), -1e-3, 1e-10);
  EXPECT_EQ(opt.steps(), 1u);
  EXPECT_FALSE(x.has_grad());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor x = Tensor::matrix(1, 3, {1.0, -2.0, 0.5});
  x.set_requires_grad(true);
  Adam opt({{"x", &x}}, {});
  x.grad();
  opt.step();
  EXPECT_EQ(x.storage(), (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, NonFiniteGradientAbortsStep) {
  Tensor x = Tensor::matrix(1, 2, {1.0, 2.0});
  Tensor y = Tensor::matrix(1, 1, 3.0);
  x.set_requires_grad(true);
  y.set_requires_grad(true);
  Adam opt({{"y", &y}, {"x", &x}}, {});
  y.grad()[0] = 1.0;
  x.grad()[1] = std::nan("");
  try {
    opt.step();
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
  }
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0);
  EXPECT_EQ(opt.steps(), 0u);
}
