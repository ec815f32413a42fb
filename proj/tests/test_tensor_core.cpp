#include <cmath>
#include <numeric>

#include "ctl/adam.hpp"
#include "ctl/nn.hpp"
#include "test_util.hpp"

using namespace ctl;
using namespace ctl::testing;

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  std::mt19937_64 rng(1);
  auto x = randn(Shape{2, 3}, rng);
  auto y = matmul(Tensord::identity(2), x);
  expect_tensor_near(y, x, 0.0);
}

TEST(Matmul, HandExample) {
  auto y = matmul(md({2, 2}, {1, 2, 3, 4}), md({2, 1}, {1, 1}));
  EXPECT_EQ(y.shape(), Shape({2, 1}));
  expect_all_near(y.data(), std::vector<double>{3, 7}, 0.0);
}

TEST(Matmul, InnerMismatchThrows) {
  EXPECT_THROW(matmul(Tensord::zeros({2, 3}), Tensord::zeros({2, 3})), DimensionError);
  EXPECT_THROW(matmul(Tensord::zeros({2, 2, 3}), Tensord::zeros({3, 3, 1})), DimensionError);
}

TEST(Matmul, Gradcheck) {
  std::mt19937_64 rng(2);
  auto a = randn(Shape{3, 4}, rng, true);
  auto b = randn(Shape{4, 2}, rng, true);
  auto r = check_grad([&] { return probe(matmul(a, b)); }, {{"a", a}, {"b", b}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(Matmul, BatchedAndSharedGradcheck) {
  std::mt19937_64 rng(3);
  auto a = randn(Shape{2, 3, 4}, rng, true);
  auto b = randn(Shape{4, 5}, rng, true);
  auto c = randn(Shape{2, 5, 2}, rng, true);
  auto r = check_grad([&] { return probe(matmul(matmul(a, b), c)); }, {{"a", a}, {"b", b}, {"c", c}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(Matmul, BatchedMatchesPerSliceProducts) {
  std::mt19937_64 rng(4);
  auto a = randn(Shape{3, 2, 4}, rng);
  auto b = randn(Shape{3, 4, 5}, rng);
  auto y = matmul(a, b);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double want = 0;
        for (std::size_t k = 0; k < 4; ++k) want += a.at({s, i, k}) * b.at({s, k, j});
        EXPECT_NEAR(y.at({s, i, j}), want, 1e-12);
      }
}

TEST(MatmulProperty, Associative) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ext(1, 6);
  for (int trial = 0; trial < 25; ++trial) {
    auto m = ext(rng), k = ext(rng), n = ext(rng), p = ext(rng);
    auto a = randn(Shape{m, k}, rng), b = randn(Shape{k, n}, rng), c = randn(Shape{n, p}, rng);
    auto left = matmul(matmul(a, b), c);
    auto right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.numel(); ++i) {
      const double scale = std::max(1.0, std::abs(left.data()[i]));
      EXPECT_LE(std::abs(left.data()[i] - right.data()[i]) / scale, 1e-6);
    }
  }
}

TEST(Softmax, UniformInput) {
  auto y = softmax(md({3}, {0, 0, 0}), 0);
  expect_all_near(y.data(), std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
}

TEST(Softmax, LogInputsGiveProportions) {
  auto y = softmax(md({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0);
  expect_all_near(y.data(), std::vector<double>{1.0 / 6, 2.0 / 6, 3.0 / 6}, 1e-12);
}

TEST(SoftmaxProperty, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(6);
  for (int axis : {0, 1, -1}) {
    auto x = randn(Shape{4, 5, 3}, rng, false, 3.0);
    auto y = softmax(x, axis);
    auto s = sum(y, axis);
    for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-6);
    for (double v : y.data()) EXPECT_GT(v, 0.0);
    auto shifted = softmax(add_scalar(x, 17.5), axis);
    expect_tensor_near(shifted, y, 1e-12);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  auto y = softmax(md({2}, {1000, 0}), 0);
  EXPECT_NEAR(y.data()[0], 1.0, 1e-12);
  EXPECT_TRUE(all_finite<double>(y.data()));
}

TEST(Softmax, Gradcheck) {
  std::mt19937_64 rng(7);
  auto x = randn(Shape{3, 4}, rng, true);
  auto r = check_grad([&] { return probe(softmax(x, 1)); }, {{"x", x}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
  auto r2 = check_grad([&] { return probe(log_softmax(x, 0)); }, {{"x", x}}, 1e-5);
  EXPECT_TRUE(r2.passed) << r2.message;
}

TEST(L2Normalize, ThreeFourFive) {
  auto y = l2_normalize_rows(md({1, 2}, {3, 4}));
  expect_all_near(y.data(), std::vector<double>{0.6, 0.8}, 1e-15);
}

TEST(L2Normalize, ZeroRowPassesThrough) {
  auto y = l2_normalize_rows(md({2, 2}, {0, 0, 3, 4}));
  expect_all_near(y.data(), std::vector<double>{0, 0, 0.6, 0.8}, 1e-15);
}

TEST(L2Normalize, RandomRowsHaveUnitNorm) {
  std::mt19937_64 rng(8);
  auto y = l2_normalize_rows(randn(Shape{5, 7}, rng));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) s += y.at({i, j}) * y.at({i, j});
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
  }
}

TEST(L2Normalize, Gradcheck) {
  std::mt19937_64 rng(9);
  auto x = randn(Shape{4, 3}, rng, true);
  auto r = check_grad([&] { return probe(l2_normalize_rows(x)); }, {{"x", x}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(MeanPool, ConstantAndSimpleMean) {
  auto c = mean_pool(Tensord::full({3, 4}, 2.5), 0);
  for (double v : c.data()) EXPECT_DOUBLE_EQ(v, 2.5);
  EXPECT_DOUBLE_EQ(mean_pool(md({3}, {1, 2, 3}), 0).item(), 2.0);
}

TEST(MeanPool, Gradcheck) {
  std::mt19937_64 rng(10);
  auto x = randn(Shape{2, 3, 4}, rng, true);
  auto r = check_grad([&] { return probe(mean_pool(x, 1)); }, {{"x", x}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(MeanPool, BackwardSpreadsReciprocalExtent) {
  auto x = md({4}, {1, 2, 3, 4}, true);
  GradTape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(mean_pool(x, 0));
  }
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Linear, IdentityWeights) {
  std::mt19937_64 rng(11);
  auto x = randn(Shape{3, 4}, rng);
  auto y = linear<double>(x, Tensord::identity(4), Tensord::zeros({4}));
  expect_tensor_near(y, x, 0.0);
}

TEST(Linear, HandExample) {
  auto y = linear<double>(md({1, 2}, {1, 1}), md({2, 1}, {1, 2}), md({1}, {0.5}));
  EXPECT_DOUBLE_EQ(y.item(), 3.5);
}

TEST(Linear, ShapeMismatchThrows) {
  EXPECT_THROW(linear<double>(Tensord::zeros({2, 3}), Tensord::zeros({4, 1}), std::nullopt), DimensionError);
  EXPECT_THROW(linear<double>(Tensord::zeros({2, 3}), Tensord::zeros({3, 2}), Tensord::zeros({3})), DimensionError);
}

TEST(Linear, Gradcheck) {
  std::mt19937_64 rng(12);
  auto x = randn(Shape{2, 3, 4}, rng, true);
  auto w = randn(Shape{4, 5}, rng, true);
  auto b = randn(Shape{5}, rng, true);
  auto r = check_grad([&] { return probe(linear<double>(x, w, b)); }, {{"x", x}, {"w", w}, {"b", b}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(ElementwiseProperty, GradcheckRandomShapes) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> ext(1, 4);
  for (int trial = 0; trial < 5; ++trial) {
    Shape s{ext(rng), ext(rng), ext(rng)};
    auto a = randn(s, rng, true);
    auto b = randn(Shape{s[2]}, rng, true);  // broadcast along leading axes
    auto pos = md({s[2]}, std::vector<double>(s[2], 0.0), true);
    for (auto& v : pos.mutable_data()) v = 1.5 + std::uniform_real_distribution<double>(0, 1)(rng);
    auto f = [&] {
      auto y = add(mul(a, b), div(square(a), pos));
      y = sub(y, scale(sqrt(pos), 0.5));
      y = add(y, pow_scalar(pos, 1.7));
      return probe(concat(y, reshape(permute(y, {0, 2, 1}), y.shape()), 0));
    };
    auto r = check_grad(f, {{"a", a}, {"b", b}, {"pos", pos}}, 1e-5);
    EXPECT_TRUE(r.passed) << s.str() << ": " << r.message;
  }
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
  BatchNorm<double> bn(3);
  std::mt19937_64 rng(14);
  auto x = randn(Shape{4, 3}, rng);
  expect_tensor_near(batchnorm(x, bn, false), x, 1e-4);
}

TEST(BatchNorm, TrainingNormalizesPerChannel) {
  BatchNorm<double> bn(3);
  std::mt19937_64 rng(15);
  auto x = add_scalar(randn(Shape{2, 16, 3}, rng, false, 4.0), 7.0);
  auto y = batchnorm(x, bn, true);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 32; ++i) m += y.data()[i * 3 + c];
    m /= 32;
    for (std::size_t i = 0; i < 32; ++i) v += std::pow(y.data()[i * 3 + c] - m, 2);
    v /= 32;
    EXPECT_NEAR(m, 0.0, 1e-5);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
  // running stats moved towards the batch statistics
  for (double v : bn.running_mean.data()) EXPECT_GT(v, 0.1);
}

TEST(BatchNorm, SinglePositionInTrainingThrows) {
  BatchNorm<double> bn(2);
  EXPECT_THROW(batchnorm(Tensord::zeros({1, 2}), bn, true), DimensionError);
}

TEST(BatchNorm, Gradcheck) {
  BatchNorm<double> bn(3);
  std::mt19937_64 rng(16);
  auto x = randn(Shape{5, 3}, rng, true);
  for (auto& v : bn.gamma.mutable_data()) v = 1.0 + std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  auto r = check_grad([&] { return probe(batchnorm(x, bn, true)); },
                      {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, 1e-4);
  EXPECT_TRUE(r.passed) << r.message;
}

TEST(Adam, ZeroGradientZeroDecayLeavesParams) {
  auto p = md({3}, {1, -2, 3}, true);
  p.node()->ensure_grad();
  std::vector<Tensord> params{p};
  AdamState<double> st;
  st.options.weight_decay = 0;
  for (int i = 0; i < 5; ++i) adam_step(params, st);
  expect_all_near(p.data(), std::vector<double>{1, -2, 3}, 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = md({1}, {0.5}, true);
  p.node()->ensure_grad()[0] = 1.0;
  std::vector<Tensord> params{p};
  AdamState<double> st;
  st.options.lr = 1e-3;
  st.options.weight_decay = 0;
  adam_step(params, st);
  // bias-corrected m/sqrt(v) is exactly 1 on the first step
  EXPECT_NEAR(0.5 - p.item(), 1e-3 / (1.0 + 1e-8), 1e-12);
}

TEST(Adam, ConvergesOnSquare) {
  auto theta = md({1}, {1.0}, true);
  std::vector<Tensord> params{theta};
  AdamState<double> st;
  st.options.lr = 0.05;
  for (int i = 0; i < 200; ++i) {
    GradTape<double> tape;
    {
      TapeScope<double> scope(tape);
      tape.backward(sum_all(square(theta)));
    }
    adam_step(params, st);
    zero_grads(params);
  }
  EXPECT_LT(std::abs(theta.item()), 0.1);
}

TEST(Adam, MomentShapeMismatchThrows) {
  std::vector<Tensord> params{md({2}, {1, 2}, true)};
  AdamState<double> st;
  st.first_moment = {std::vector<double>(3)};
  st.second_moment = {std::vector<double>(3)};
  EXPECT_THROW(adam_step(params, st), DimensionError);
}

TEST(StepDecay, DividesByTenEverySixtyEpochs) {
  EXPECT_DOUBLE_EQ(step_decay_lr(3e-4, 0, 60, 0.1), 3e-4);
  EXPECT_DOUBLE_EQ(step_decay_lr(3e-4, 59, 60, 0.1), 3e-4);
  EXPECT_NEAR(step_decay_lr(3e-4, 60, 60, 0.1), 3e-5, 1e-18);
  EXPECT_NEAR(step_decay_lr(3e-4, 120, 60, 0.1), 3e-6, 1e-18);
  EXPECT_DOUBLE_EQ(step_decay_lr(3e-4, 500, 0, 0.1), 3e-4);
}

TEST(Gradcheck, SumGivesOnes) {
  std::mt19937_64 rng(17);
  auto x = randn(Shape{3, 3}, rng, true);
  GradTape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(sum_all(x));
  }
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
  auto r = check_grad([&] { return sum_all(x); }, {{"x", x}}, 1e-5);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(Gradcheck, CorruptedBackwardIsCaught) {
  auto bad_square = [](const Tensord& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * x.data()[i];
    return record_op<double>(x.shape(), std::move(out), {x}, [x](std::span<const double> g, std::span<const double>) {
      auto gx = grad_sink(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 3.0 * x.data()[i] * g[i];  // should be 2x
    });
  };
  std::mt19937_64 rng(18);
  auto x = randn(Shape{4}, rng, true);
  auto r = check_grad([&] { return sum_all(bad_square(x)); }, {{"x", x}}, 1e-4);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 1e-4);
}

TEST(Gradcheck, NonFiniteLossReported) {
  auto x = md({2}, {-1, 1}, true);
  auto r = check_grad([&] { return sum_all(sqrt(x)); }, {{"x", x}}, 1e-4);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(r.finite);
}

TEST(GradTape, BackwardDoesNotMutateForwardValues) {
  std::mt19937_64 rng(19);
  auto a = randn(Shape{3, 4}, rng, true);
  auto b = randn(Shape{4, 2}, rng, true);
  GradTape<double> tape;
  TapeScope<double> scope(tape);
  auto h = relu(matmul(a, b));
  auto y = softmax(h, 1);
  std::vector<double> before_a(a.data().begin(), a.data().end());
  std::vector<double> before_h(h.data().begin(), h.data().end());
  std::vector<double> before_y(y.data().begin(), y.data().end());
  tape.backward(probe(y));
  expect_all_near(a.data(), before_a, 0.0);
  expect_all_near(h.data(), before_h, 0.0);
  expect_all_near(y.data(), before_y, 0.0);
}

TEST(GradTape, NoTapeMeansNoRecording) {
  auto x = md({2}, {1, 2}, true);
  auto y = square(x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensord(Shape{2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Shape({1, 1, 1, 1, 1}), DimensionError);
}
