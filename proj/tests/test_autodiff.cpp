#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "n3net/gradcheck.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/ops.hpp"

namespace n3net::ad {
namespace {

using LossFn = std::function<Tensor(Tape&, std::vector<Tensor>&)>;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape), true);
  for (double& v : t.data()) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

// Reduces any output to a scalar with fixed random coefficients.
Tensor project(Tape& tape, const Tensor& y, std::uint64_t seed = 7) {
  Rng rng(seed);
  Tensor r(y.shape());
  for (double& v : r.data()) v = uniform01(rng) - 0.5;
  return sum(tape, mul(tape, y, r));
}

void expect_gradients_match(std::vector<Tensor> inputs, const LossFn& loss,
                            double tol = 1e-6) {
  Tape tape;
  tape.backward(loss(tape, inputs));
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    for (std::size_t i = 0; i < inputs[n].size(); ++i) {
      const double analytic = inputs[n].grad()[i];
      double& x = inputs[n].data()[i];
      const double numeric = central_difference(
          [&] {
            Tape inner(Tape::Mode::kInference);
            return loss(inner, inputs).item();
          },
          x, 1e-5);
      EXPECT_LT(relative_error(analytic, numeric), tol)
          << "input " << n << " entry " << i << ": " << analytic << " vs " << numeric;
    }
  }
}

TEST(TensorTest, ShapeAndStorage) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_THROW(Tensor({2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(Tensor({2}).item(), std::invalid_argument);
}

TEST(TensorTest, CopiesShareCloneDoesNot) {
  Tensor a({2}, {1.0, 2.0});
  Tensor b = a;
  Tensor c = a.clone();
  b.data()[0] = 5.0;
  EXPECT_EQ(a.data()[0], 5.0);
  EXPECT_EQ(c.data()[0], 1.0);
}

TEST(LinearOp, Example) {
  Tape tape;
  Tensor x({1, 2}, {1, 2});
  Tensor w({2, 2}, {1, 0, 0, 1});
  Tensor b({2}, {0.5, -0.5});
  const Tensor y = linear(tape, x, w, b);
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_EQ(y.data()[0], 1.5);
  EXPECT_EQ(y.data()[1], 1.5);
}

TEST(LinearOp, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  expect_gradients_match(
      {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
      [](Tape& t, std::vector<Tensor>& in) { return project(t, linear(t, in[0], in[1], in[2])); });
}

TEST(LinearOp, RejectsMismatch) {
  Tape tape;
  EXPECT_THROW(linear(tape, Tensor({1, 3}), Tensor({2, 2}), Tensor({2})), std::invalid_argument);
}

TEST(Conv3x3, UnitCenterKernelIsIdentity) {
  Tape tape;
  Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  const Tensor y = conv2d_3x3(tape, x, k, Tensor({1}));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv3x3, AllOnesKernelSumsZeroPaddedNeighborhood) {
  Tape tape;
  Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  const Tensor y = conv2d_3x3(tape, x, k, Tensor({1}));
  EXPECT_EQ(y.data()[4], 45.0);
  EXPECT_EQ(y.data()[0], 1.0 + 2.0 + 4.0 + 5.0);
}

TEST(Conv3x3, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  expect_gradients_match(
      {random_tensor({2, 5, 4}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
      [](Tape& t, std::vector<Tensor>& in) {
        return project(t, conv2d_3x3(t, in[0], in[1], in[2]));
      });
}

TEST(ReluOp, ForwardAndGradient) {
  Tape tape;
  Tensor x({3}, {-1.0, 0.0, 2.0}, true);
  const Tensor y = relu(tape, x);
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_EQ(y.data()[1], 0.0);
  EXPECT_EQ(y.data()[2], 2.0);
  tape.backward(sum(tape, y));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(ReluOp, ReplayedPatternIgnoresSign) {
  std::vector<std::vector<bool>> patterns;
  {
    ReluPatternScope scope(ReluPatternScope::Mode::kRecord, patterns);
    Tape tape;
    relu(tape, Tensor({2}, {1.0, -1.0}));
  }
  ASSERT_EQ(patterns.size(), 1u);
  ReluPatternScope scope(ReluPatternScope::Mode::kReplay, patterns);
  Tape tape;
  const Tensor y = relu(tape, Tensor({2}, {-3.0, 4.0}));
  EXPECT_EQ(y.data()[0], -3.0);
  EXPECT_EQ(y.data()[1], 0.0);
}

TEST(MseLoss, ExampleAndGradient) {
  Tape tape;
  Tensor p({2}, {1.0, 3.0}, true);
  Tensor t({2}, {0.0, 1.0});
  const Tensor l = mse_loss(tape, p, t);
  EXPECT_DOUBLE_EQ(l.item(), 2.5);
  tape.backward(l);
  EXPECT_DOUBLE_EQ(p.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], 2.0);
}

TEST(ConcatChannels, EightPlusFiftySix) {
  Tape tape;
  const std::vector<Tensor> parts{Tensor({8, 4, 4}), Tensor({56, 4, 4})};
  EXPECT_EQ(concat_channels(tape, parts).shape(), (Shape{64, 4, 4}));
}

TEST(ConcatChannels, RejectsSpatialMismatch) {
  Tape tape;
  const std::vector<Tensor> parts{Tensor({1, 4, 4}), Tensor({1, 3, 4})};
  EXPECT_THROW(concat_channels(tape, parts), std::invalid_argument);
}

TEST(TapeTest, SumGradientIsOnes) {
  Tape tape;
  Tensor x({3}, {1, 2, 3}, true);
  tape.backward(sum(tape, x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(TapeTest, RepeatedBackwardAccumulatesLeafGradients) {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  const Tensor l = sum(tape, mul(tape, x, x));
  tape.backward(l);
  tape.backward(l);
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 8.0);
}

TEST(TapeTest, NonScalarLossThrows) {
  Tape tape;
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(tape.backward(scale(tape, x, 2.0)), std::invalid_argument);
}

TEST(TapeTest, InferenceModeRecordsNothing) {
  Tape tape(Tape::Mode::kInference);
  Tensor x({2}, {1, 2}, true);
  sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(TapeTest, GradientIsLinearInTheLoss) {
  Rng rng(3);
  Tensor x = random_tensor({1, 4, 4}, rng);
  Tensor k = random_tensor({2, 1, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  auto grad_of = [&](double alpha, double beta) {
    x.zero_grad();
    Tape tape;
    const Tensor y = conv2d_3x3(tape, x, k, b);
    const Tensor l = add(tape, scale(tape, project(tape, y, 1), alpha),
                         scale(tape, project(tape, y, 2), beta));
    tape.backward(l);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto g1 = grad_of(1, 0), g2 = grad_of(0, 1), g = grad_of(2.0, -3.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.0 * g1[i] - 3.0 * g2[i], 1e-12);
}

TEST(TapeTest, BackwardIsDeterministic) {
  Rng rng(4);
  std::vector<Tensor> in{random_tensor({3, 4}, rng), random_tensor({4, 5}, rng),
                         random_tensor({5}, rng)};
  auto run = [&] {
    for (auto& t : in) t.zero_grad();
    Tape tape;
    tape.backward(project(tape, relu(tape, linear(tape, in[0], in[1], in[2]))));
    return std::vector<double>(in[1].grad().begin(), in[1].grad().end());
  };
  EXPECT_EQ(run(), run());
}

class PrimitiveGradients : public ::testing::Test {
 protected:
  Rng rng{11};
};

TEST_F(PrimitiveGradients, Elementwise) {
  expect_gradients_match({random_tensor({5}, rng), random_tensor({5}, rng)},
                         [](Tape& t, std::vector<Tensor>& in) {
                           const Tensor a = add(t, in[0], in[1]);
                           const Tensor s = sub(t, in[0], neg(t, in[1]));
                           const Tensor m = mul(t, a, s);
                           return project(t, add_scalar(t, scale(t, m, 1.5), 0.25));
                         });
}

TEST_F(PrimitiveGradients, DivScalarAndSoftplus) {
  expect_gradients_match({random_tensor({6}, rng), random_tensor({1}, rng, 0.5, 2.0)},
                         [](Tape& t, std::vector<Tensor>& in) {
                           return project(t, softplus(t, div_scalar(t, in[0], in[1])));
                         });
}

TEST_F(PrimitiveGradients, SoftmaxAndLog1m) {
  expect_gradients_match({random_tensor({3, 4}, rng)}, [](Tape& t, std::vector<Tensor>& in) {
    return project(t, log1m(t, softmax(t, in[0])));
  });
}

TEST_F(PrimitiveGradients, MaskedFill) {
  expect_gradients_match({random_tensor({4}, rng)}, [](Tape& t, std::vector<Tensor>& in) {
    return project(t, softmax(t, masked_fill(t, in[0], {false, true, false, false}, -1e30)));
  });
}

TEST_F(PrimitiveGradients, StackSelectAndResidual) {
  expect_gradients_match(
      {random_tensor({2, 3, 3}, rng), random_tensor({3, 3, 3}, rng)},
      [](Tape& t, std::vector<Tensor>& in) {
        const std::vector<Tensor> parts{select(t, in[0], 1), select(t, in[1], 0)};
        const Tensor stacked = stack(t, std::span<const Tensor>(parts));
        return add(t, project(t, stacked), project(t, residual_add(t, in[1], in[0])));
      });
}

TEST_F(PrimitiveGradients, PadAndCrop) {
  expect_gradients_match({random_tensor({2, 4, 5}, rng)}, [](Tape& t, std::vector<Tensor>& in) {
    const Tensor padded = pad_reflect(t, in[0], 2, 3);
    return add(t, project(t, padded), project(t, crop(t, padded, 3, 3)));
  });
}

TEST(PadReflect, MirrorsWithoutRepeatingTheEdge) {
  Tape tape;
  const Tensor y = pad_reflect(tape, Tensor({1, 1, 3}, {1, 2, 3}), 0, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 5}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{1, 2, 3, 2, 1}));
}

TEST(Log1m, ClampedEntriesAreConstant) {
  Tape tape;
  Tensor x({1}, {1.0}, true);
  const Tensor y = log1m(tape, x);
  EXPECT_NEAR(y.item(), std::log(1e-7), 1e-9);
  tape.backward(sum(tape, y));
  EXPECT_EQ(x.grad()[0], 0.0);
}

}  // namespace
}  // namespace n3net::ad
