/* Copyright 2026 The normkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "normkit/grad_check.hpp"
#include "normkit/normalizer.hpp"
#include "normkit/tape.hpp"
#include "test_util.hpp"

namespace normkit {
namespace {

using testing::RandomTensor;

TEST(BackwardTest, SumGivesOnes) {
  Tape tape;
  const Var x = tape.leaf(RandomTensor({2, 3, 2, 2}, 1));
  const Tensor g = tape.backward(ad::sum(x)).of(x);
  for (Index i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 1.0);
}

TEST(BackwardTest, MeanGivesOneOverN) {
  Tape tape;
  const Var x = tape.leaf(RandomTensor({5, 2}, 2));
  const Tensor g = tape.backward(ad::mean(x)).of(x);
  for (Index i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 0.1);
}

TEST(BackwardTest, SumOfSquares) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, {1, 2}));
  const Tensor g = tape.backward(ad::sum(ad::square(x))).of(x);
  EXPECT_EQ(g[0], 2.0);
  EXPECT_EQ(g[1], 4.0);
}

TEST(BackwardTest, FanOutAddsBranchGradients) {
  // f = sum(x * x) + sum(3 x): df/dx = 2x + 3.
  Tape tape;
  const Tensor xv({3}, {-1.0, 0.5, 2.0});
  const Var x = tape.leaf(xv);
  const Var loss = ad::sum(x * x) + ad::sum(ad::scale(x, 3.0));
  const Tensor g = tape.backward(loss).of(x);
  for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * xv[i] + 3.0);
}

TEST(BackwardTest, DiamondGraph) {
  // a = tanh(x); loss = sum(a * sigmoid(a)); x reaches loss along two paths.
  Tape tape;
  const Tensor xv({2}, {0.3, -0.7});
  const Var x = tape.leaf(xv);
  const Var a = ad::tanh(x);
  const Tensor g = tape.backward(ad::sum(a * ad::sigmoid(a))).of(x);
  for (Index i = 0; i < 2; ++i) {
    const double t = std::tanh(xv[i]), s = 1.0 / (1.0 + std::exp(-t));
    EXPECT_NEAR(g[i], (s + t * s * (1 - s)) * (1 - t * t), 1e-15);
  }
}

TEST(BackwardTest, UnreachedLeafGetsZeros) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, {1, 2}));
  const Var unused = tape.leaf(Tensor({3}, {1, 2, 3}));
  const Gradients g = tape.backward(ad::sum(x));
  EXPECT_EQ(g.of(unused).values().abs().sum(), 0.0);
  EXPECT_EQ(g.of(unused).shape(), Shape{3});
}

TEST(BackwardTest, NonScalarLossIsAContractError) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, {1, 2}));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(BackwardTest, RejectsInputsFromTheFuture) {
  Tape tape;
  tape.leaf(Tensor::scalar(1.0));
  EXPECT_THROW(tape.record(Tensor::scalar(1.0), {5}, [](const Tensor& g) {
    return std::vector<Tensor>{g};
  }),
               ContractError);
}

TEST(GradCheckTest, SquareAtOne) {
  const auto f = [](Tape&, const Var& x) { return ad::sum(ad::square(x)); };
  EXPECT_LT(grad_check(f, Tensor({1}, {1.0}), 1e-5), 1e-8);
}

TEST(GradCheckTest, BatchNormThenSumOfSquares) {
  PresetOptions options;
  options.rank = 2;
  options.channels = 3;
  options.sigma = 0.5;
  const NormalizerSpec spec = spec_preset(Preset::kBN, options);
  const Tensor weights = RandomTensor({4, 3}, 44);
  // A plain sum of squares of a sigma = 0 BN output is constant; weighting
  // and sigma > 0 keep the check informative.
  const auto f = [&](Tape& tape, const Var& z) {
    return ad::sum(ad::square(ad::normalize(z, spec).out * tape.leaf(weights)));
  };
  EXPECT_LT(grad_check(f, RandomTensor({4, 3}, 43)), 1e-6);
}

TEST(GradCheckTest, NanNearTheProbeIsCheckFailed) {
  const ScalarFn f = [](const Tensor& x) {
    return x[1] > 2.0 ? std::numeric_limits<double>::quiet_NaN() : x.values().sum();
  };
  try {
    numeric_gradient(f, Tensor({3}, {0.0, 2.0, 0.0}), 1e-5);
    FAIL() << "expected CheckFailedError";
  } catch (const CheckFailedError& e) {
    EXPECT_EQ(e.coordinate(), 1);
  }
}

TEST(GradCheckTest, EpsOutsideRangeIsRejected) {
  const ScalarFn f = [](const Tensor& x) { return x.values().sum(); };
  EXPECT_THROW(numeric_gradient(f, Tensor({1}, {1.0}), 0.0), ContractError);
  EXPECT_THROW(numeric_gradient(f, Tensor({1}, {1.0}), 0.02), ContractError);
}

TEST(GradCheckTest, RelativeErrorFloor) {
  EXPECT_EQ(max_relative_error(Tensor({2}, {0.0, 1.0}), Tensor({2}, {0.0, 1.0})), 0.0);
  EXPECT_DOUBLE_EQ(max_relative_error(Tensor({1}, {1e-9}), Tensor({1}, {0.0})), 0.1);
}

}  // namespace
}  // namespace normkit
