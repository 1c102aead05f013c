#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gazeseq/nn/batch.hpp"
#include "gazeseq/nn/grad_check.hpp"
#include "gazeseq/nn/ops.hpp"
#include "gazeseq/nn/param.hpp"

using namespace gazeseq;
using namespace gazeseq::nn;

TEST(Softmax, UniformLogits) {
  const Vector p = stable_softmax(Vector::Zero(6));
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(p[i], 1.0 / 6.0);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Vector x(3);
  x << 1000.0, 0.0, 0.0;
  const Vector p = stable_softmax(x);
  EXPECT_TRUE(p.allFinite());
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_LT(p[1], 1e-300);
}

TEST(Softmax, ShiftInvariantAndArgmaxPreserving) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(7);
    for (auto& v : x) v = n(rng);
    const double c = n(rng) * 10.0;
    const Vector p = stable_softmax(x);
    const Vector q = stable_softmax((x.array() + c).matrix());
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_TRUE(((p - q).cwiseAbs().array() < 1e-12).all());
    Eigen::Index ix, ip;
    x.maxCoeff(&ix);
    p.maxCoeff(&ip);
    EXPECT_EQ(ix, ip);
    EXPECT_TRUE((p.array() >= 0.0).all() && (p.array() <= 1.0).all());
  }
}

TEST(Softmax, RejectsNonFinite) {
  Vector x(2);
  x << 0.0, std::nan("");
  EXPECT_THROW(stable_softmax(x), Error);
}

TEST(CrossEntropy, UniformSixClasses) {
  const auto ce = cross_entropy(Vector::Constant(6, 1.0 / 6.0), 4);
  EXPECT_NEAR(ce.loss, 1.791759469228055, 1e-10);
}

TEST(CrossEntropy, PerfectPrediction) {
  Vector p = Vector::Zero(4);
  p[2] = 1.0;
  const auto ce = cross_entropy(p, 2);
  EXPECT_NEAR(ce.loss, 0.0, 1e-11);
  EXPECT_EQ(ce.grad_logits.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CrossEntropy, GradientIsProbsMinusOneHot) {
  Vector p(3);
  p << 0.7, 0.2, 0.1;
  const auto ce = cross_entropy(p, 0);
  EXPECT_NEAR(ce.grad_logits[0], -0.3, 1e-12);
  EXPECT_NEAR(ce.grad_logits[1], 0.2, 1e-12);
  EXPECT_NEAR(ce.grad_logits[2], 0.1, 1e-12);
  EXPECT_THROW(cross_entropy(p, 3), Error);
}

TEST(CrossEntropy, WeightedBatchMatchesPerSample) {
  Matrix probs(2, 3);
  probs << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3;
  Matrix w(2, 3);
  w << 2, 1, 0, 0, 0, 1;
  Matrix g;
  const double loss = weighted_cross_entropy(probs, w, g);
  const double expected = (2 * -std::log(0.5) - std::log(0.3) - std::log(0.3)) / 4.0;
  EXPECT_NEAR(loss, expected, 1e-11);
  // Row 0: 3*p - counts; row 1: 1*p - counts; divided by total weight 4.
  EXPECT_NEAR(g(0, 0), (3 * 0.5 - 2) / 4.0, 1e-12);
  EXPECT_NEAR(g(1, 2), (0.3 - 1) / 4.0, 1e-12);
}

TEST(Activations, OriginValues) {
  EXPECT_EQ(std::tanh(0.0), 0.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(silu(0.0), 0.0);
  EXPECT_DOUBLE_EQ(silu_grad(0.0), 0.5);
}

TEST(Activations, SiluTails) {
  EXPECT_NEAR(silu(-20.0), -20.0 / (1.0 + std::exp(20.0)), 1e-20);
  EXPECT_NEAR(silu(-20.0), -4.122307e-8, 1e-13);
  EXPECT_NEAR(silu(40.0), 40.0, 1e-12);
}

TEST(Activations, DerivativesMatchCentralDifferences) {
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    const double h = 1e-6;
    EXPECT_NEAR(sigmoid_grad(x), (sigmoid(x + h) - sigmoid(x - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(tanh_grad(x), (std::tanh(x + h) - std::tanh(x - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(silu_grad(x), (silu(x + h) - silu(x - h)) / (2 * h), 1e-8);
  }
}

TEST(Dropout, EvalIsIdentity) {
  Matrix x = Matrix::Random(5, 7);
  EXPECT_EQ(dropout_apply(x, 0.2, Mode::eval, 1), x);
  EXPECT_EQ(dropout_apply(x, 0.0, Mode::train, 1), x);
}

TEST(Dropout, LawOfLargeNumbers) {
  const Matrix x = Matrix::Ones(1, 100000);
  const Matrix y = dropout_apply(x, 0.2, Mode::train, 42);
  const double zero_fraction = static_cast<double>((y.array() == 0.0).count()) / 1e5;
  EXPECT_NEAR(y.mean(), 1.0, 0.01);
  EXPECT_NEAR(zero_fraction, 0.2, 0.01);
  EXPECT_EQ(y, dropout_apply(x, 0.2, Mode::train, 42));
  EXPECT_THROW(dropout_apply(x, 1.0, Mode::train, 1), Error);
}

TEST(Regularizer, PlugIntoFormula) {
  Param p("w", 1, 2);
  p.value << 1.0, -1.0;
  RegConfig cfg;
  const auto pen = l1l2_penalty(p, cfg);
  EXPECT_NEAR(pen.value, 2.2e-4, 1e-18);
  EXPECT_NEAR(pen.grad(0, 0), 1e-5 + 2e-4, 1e-18);
  EXPECT_NEAR(pen.grad(0, 1), -1e-5 - 2e-4, 1e-18);
}

TEST(Regularizer, ZeroWeightsAndQuadraticScaling) {
  Param p("w", 3, 3);
  RegConfig cfg;
  auto pen = l1l2_penalty(p, cfg);
  EXPECT_EQ(pen.value, 0.0);
  EXPECT_EQ(pen.grad.cwiseAbs().maxCoeff(), 0.0);

  p.value = Matrix::Random(3, 3);
  cfg.l1 = 0.0;
  const double base = l1l2_penalty(p, cfg).value;
  p.value *= 2.0;
  EXPECT_NEAR(l1l2_penalty(p, cfg).value, 4.0 * base, 1e-15);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  Param p("w", 1, 1);
  p.grad(0, 0) = 1.0;
  Param* list[] = {&p};
  adam_step(list, AdamConfig{}, 1);
  EXPECT_NEAR(p.value(0, 0), -0.001, 1e-10);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(Adam, ZeroGradientLeavesWeights) {
  Param p("w", 2, 2);
  p.value << 1, 2, 3, 4;
  const Matrix before = p.value;
  Param* list[] = {&p};
  adam_step(list, AdamConfig{}, 1);
  EXPECT_EQ(p.value, before);
  EXPECT_THROW(adam_step(list, AdamConfig{}, 0), Error);
}

TEST(Adam, EqualGradientsGiveEqualUpdates) {
  Param a("a", 1, 3), b("b", 1, 3);
  for (std::uint64_t t = 1; t <= 5; ++t) {
    a.grad << 0.3, -0.2, 1.5;
    b.grad = a.grad;
    Param* list[] = {&a, &b};
    adam_step(list, AdamConfig{}, t);
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(GradCheck, DenseTanhLayer) {
  std::mt19937_64 rng(11);
  Param w("dense.W", 5, 4), b("dense.b", 1, 4);
  glorot_uniform(w.value, 5, 4, rng);
  b.value = Matrix::Random(1, 4) * 0.1;
  Matrix x = Matrix::Random(1, 5);
  const std::size_t target = 2;

  auto loss_fn = [&](bool with_grad) {
    const Matrix pre = (x * w.value).rowwise() + b.value.row(0);
    const Matrix act = pre.array().tanh().matrix();
    const Vector probs = stable_softmax(act.row(0).transpose());
    const auto ce = cross_entropy(probs, target);
    if (with_grad) {
      const Matrix dact = ce.grad_logits.transpose();
      const Matrix dpre = dact.cwiseProduct(pre.unaryExpr([](double v) { return tanh_grad(v); }));
      w.grad = x.transpose() * dpre;
      b.grad = dpre;
    }
    return ce.loss;
  };
  Param* params[] = {&w, &b};
  const auto report = grad_check(loss_fn, params);
  EXPECT_EQ(report.coordinates, 24u);
  EXPECT_LT(report.max_rel_error, 1e-6) << report.worst_param;
}

TEST(GradCheck, DetectsWrongGradient) {
  Param w("w", 1, 3);
  w.value << 0.5, -0.3, 0.8;
  auto loss_fn = [&](bool with_grad) {
    if (with_grad) w.grad = 3.0 * w.value;  // true gradient is 2w
    return w.value.squaredNorm();
  };
  Param* params[] = {&w};
  EXPECT_GT(grad_check(loss_fn, params).max_rel_error, 0.1);
}
