#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mhls/autograd.hpp"
#include "mhls/grad_check.hpp"
#include "oracle.hpp"

using namespace mhls;

TEST(Tensor, ShapeAndStorage) {
  const Tensor t(Shape{2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.shape().str(), "[2x3]");
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Shape({2, 0}), DimensionError);
}

TEST(Matmul, IdentityZeroAndHandComputed) {
  const Tensor a = Tensor::matrix({{5, 6}, {7, 8}});
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 1}}), a), a);
  EXPECT_EQ(matmul(Tensor(Shape{2, 2}), a), Tensor(Shape{2, 2}));
  EXPECT_EQ(matmul(Tensor::matrix({{1, 2}, {3, 4}}), a), Tensor::matrix({{19, 22}, {43, 50}}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

TEST(Elementwise, Definitions) {
  Tape tape;
  const Var x = tape.constant(Tensor::vector({0.0, -1.0, 2.0}));
  EXPECT_DOUBLE_EQ(sigmoid(x).value()[0], 0.5);
  EXPECT_DOUBLE_EQ(tanh(x).value()[0], 0.0);
  EXPECT_DOUBLE_EQ(relu(x).value()[1], 0.0);
  EXPECT_DOUBLE_EQ(relu(x).value()[2], 2.0);
  EXPECT_THROW(add(x, tape.constant(Tensor::vector({1.0}))), DimensionError);
  EXPECT_THROW(mul(x, tape.constant(Tensor::vector({1.0}))), DimensionError);
}

TEST(Softmax, Examples) {
  const Tensor s = softmax(Tensor::vector({3.7, 3.7}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  const Tensor t = softmax(Tensor::vector({0.0, std::log(3.0)}));
  EXPECT_NEAR(t[0], 0.25, 1e-15);
  EXPECT_NEAR(t[1], 0.75, 1e-15);
  EXPECT_THROW(softmax(Tensor::vector({1.0})), DimensionError);
}

TEST(Softmax, PositiveNormalizedShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = oracle::random_tensor(Shape{5}, rng, 20.0);
    const Tensor a = softmax(x);
    double total = 0.0;
    for (double v : a.data()) {
      EXPECT_GT(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (double& v : x.data()) v += 7.25;
    const Tensor b = softmax(x);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(LayerNorm, Examples) {
  const Tensor one = Tensor::filled(Shape{4}, 1.0), zero(Shape{4});
  const Tensor flat = layer_norm(Tensor::filled(Shape{4}, 3.0), one, zero);
  for (double v : flat.data()) {
    EXPECT_LE(std::abs(v), 1.5e-8);
  }
  const Tensor y = layer_norm(Tensor::vector({1.0, -1.0}), Tensor::filled(Shape{2}, 1.0),
                              Tensor(Shape{2}), 1e-5);
  EXPECT_NEAR(y[0], 1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
  EXPECT_NEAR(y[1], -1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(LayerNorm, ShiftInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = oracle::random_tensor(Shape{6}, rng);
    const Tensor g = oracle::random_tensor(Shape{6}, rng), b = oracle::random_tensor(Shape{6}, rng);
    const Tensor a = layer_norm(x, g, b);
    for (double& v : x.data()) v += 2.5;
    const Tensor c = layer_norm(x, g, b);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a[i], c[i], 1e-12);
  }
}

TEST(Mode3Contract, OneHotZeroAndBilinear) {
  std::mt19937_64 rng(7);
  const Tensor w = oracle::random_tensor(Shape{3, 2, 4}, rng);
  for (std::size_t k = 0; k < 4; ++k) {
    Tensor z(Shape{4});
    z[k] = 1.0;
    const Tensor s = mode3_contract(w, z);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(s.at(i, j), w.at(i, j, k));
    }
  }
  EXPECT_EQ(mode3_contract(w, Tensor(Shape{4})), Tensor(Shape{3, 2}));
  const Tensor z1 = oracle::random_tensor(Shape{4}, rng), z2 = oracle::random_tensor(Shape{4}, rng);
  Tensor z12(Shape{4}), z3(Shape{4});
  for (std::size_t k = 0; k < 4; ++k) {
    z12[k] = z1[k] + z2[k];
    z3[k] = 3.0 * z1[k];
  }
  const Tensor a = mode3_contract(w, z1), b = mode3_contract(w, z2);
  const Tensor sum = mode3_contract(w, z12), triple = mode3_contract(w, z3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(sum[i], a[i] + b[i], 1e-12);
    EXPECT_NEAR(triple[i], 3.0 * a[i], 1e-12);
  }
  EXPECT_THROW(mode3_contract(w, Tensor(Shape{3})), DimensionError);
}

TEST(GradCheck, SigmoidDerivativeAtZero) {
  Tape tape;
  const Var x = tape.input(Tensor::vector({0.0}));
  const Var y = sum(sigmoid(x));
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 0.25);
}

TEST(GradCheck, ConstantGraphHasZeroGradient) {
  const GraphFn graph = [](Tape& t, std::span<const Var>) {
    return sum(t.constant(Tensor::vector({1.0, 2.0})));
  };
  const auto report = grad_check(graph, {Tensor::vector({0.3, 0.4})});
  EXPECT_EQ(report.max_rel_error, 0.0);
}

TEST(GradCheck, RejectsBadStepAndNonFiniteInputs) {
  const GraphFn graph = [](Tape&, std::span<const Var> in) { return sum(in[0]); };
  EXPECT_THROW(grad_check(graph, {Tensor::vector({1.0})}, 1e-3), std::invalid_argument);
  EXPECT_THROW(grad_check(graph, {Tensor::vector({NAN})}), std::invalid_argument);
}

TEST(GradCheck, NonFiniteGradientNamesTheOp) {
  Tape tape;
  const Var x = tape.input(Tensor::vector({800.0}));
  const Var y = sum(exp(exp(x)));
  try {
    tape.backward(y);
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // relu's kink: a finite difference straddling 0 disagrees with either one-sided slope.
  const GraphFn graph = [](Tape&, std::span<const Var> in) { return sum(relu(in[0])); };
  const auto report = grad_check(graph, {Tensor::vector({0.0})});
  EXPECT_GT(report.max_rel_error, 1e-4);
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  Tape tape;
  const Var x = tape.input(Tensor::vector({2.0, 3.0}));
  tape.backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 4.0);
  EXPECT_DOUBLE_EQ(tape.grad(x)[1], 6.0);
}
