// Copyright 2026 The Antehoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "antehoc/optim.hpp"
#include "support/gradcheck.hpp"

namespace antehoc {
namespace {

TEST(Sgd, ZeroLearningRateIsIdentity) {
  Tape tape;
  const std::vector<Var> p{tape.leaf(Tensor::of({{1, 2}}))};
  const std::vector<Var> g{Var(Tensor::of({{5, -5}}))};
  EXPECT_EQ(sgd_step_differentiable(p, g, 0.0)[0].value(), p[0].value());
}

TEST(Sgd, SingleStepExample) {
  const std::vector<Var> p{Var(Tensor::scalar(1.0))};
  const std::vector<Var> g{Var(Tensor::scalar(2.0))};
  EXPECT_DOUBLE_EQ(sgd_step_differentiable(p, g, 0.1)[0].value().item(), 0.8);
}

TEST(Sgd, RejectsMismatchedAndNegativeInputs) {
  const std::vector<Var> p{Var(Tensor(1, 2))};
  const std::vector<Var> g{Var(Tensor(2, 1))};
  EXPECT_THROW(sgd_step_differentiable(p, g, 0.1), ShapeError);
  EXPECT_THROW(sgd_step_differentiable(p, std::vector<Var>{}, 0.1), ContractError);
  EXPECT_THROW(sgd_step_differentiable(p, p, -1.0), ParameterError);
}

// One differentiable step on a loss with cross terms; the outer function is
// checked against central differences through the update.
TEST(Sgd, GradientFlowsThroughTheUpdate) {
  Rng rng = make_rng({21});
  const Tensor a = testing::random_tensor(rng, 3, 3);
  const testing::OpInstance inst{{testing::random_tensor(rng, 3, 1)}, [a](std::span<const Var> x) {
                                   const Var inner = sum(pow(matmul(Var(a), x[0]), 2.0));
                                   const std::vector<Var> xs{x[0]};
                                   const auto g = Tape::grad(inner, xs, GradMode::kCreateGraph);
                                   return sum(sigmoid(sgd_step_differentiable(xs, g, 0.05)[0]));
                                 }};
  EXPECT_LT(testing::first_order_error(inst, rng), 1e-5);
}

// f(x) = h x^2 / 2 gives x_K = (1 - eta h)^K x_0, so dx_K/dx_0 is the
// product of the per-step factors.
TEST(Sgd, UnrolledQuadraticMatchesClosedForm) {
  const double h = 1.7, eta = 0.2, x0 = 0.9;
  const int K = 12;
  Tape tape;
  const Var start = tape.leaf(Tensor::scalar(x0));
  std::vector<Var> x{start};
  for (int k = 0; k < K; ++k) {
    const Var f = scale(mul(x[0], x[0]), h / 2.0);
    const auto g = Tape::grad(f, x, GradMode::kCreateGraph);
    x = sgd_step_differentiable(x, g, eta);
  }
  const double factor = std::pow(1.0 - eta * h, K);
  EXPECT_NEAR(x[0].value().item(), factor * x0, 1e-14);
  EXPECT_NEAR(Tape::grad(x[0], std::vector<Var>{start})[0].value().item(), factor, 1e-14);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<Tensor> p{Tensor::of({{1.5, -2}})};
  const std::vector<Tensor> g{Tensor(1, 2)};
  AdamState s = AdamState::for_params(p);
  for (int i = 0; i < 3; ++i) adam_step(s, p, g);
  EXPECT_EQ(p[0], Tensor::of({{1.5, -2}}));
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  std::vector<Tensor> p{Tensor::of({{0, 0, 0}})};
  const std::vector<Tensor> g{Tensor::of({{3, -0.2, 40}})};
  AdamState s = AdamState::for_params(p);
  adam_step(s, p, g, AdamHyper{.lr = 0.01});
  EXPECT_NEAR(p[0][0], -0.01, 1e-9);
  EXPECT_NEAR(p[0][1], 0.01, 1e-9);
  EXPECT_NEAR(p[0][2], -0.01, 1e-9);
}

TEST(Adam, DescendsOnAParabola) {
  std::vector<Tensor> p{Tensor::scalar(2.0)};
  AdamState s = AdamState::for_params(p);
  for (int i = 0; i < 500; ++i) {
    const std::vector<Tensor> g{Tensor::scalar(2.0 * p[0].item())};
    adam_step(s, p, g, AdamHyper{.lr = 0.05});
  }
  EXPECT_LT(std::abs(p[0].item()), 0.05);
}

TEST(Adam, RejectsMisalignedState) {
  std::vector<Tensor> p{Tensor(1, 1)};
  AdamState s;
  EXPECT_THROW(adam_step(s, p, std::vector<Tensor>{Tensor(1, 1)}), ContractError);
}

TEST(DifferentiableAdam, TracksPlainAdamAwayFromZero) {
  std::vector<Tensor> plain{Tensor::of({{0.3, -1.1}})};
  AdamState s = AdamState::for_params(plain);
  DifferentiableAdam diff(AdamHyper{.lr = 0.01});
  std::vector<Var> x{Var(plain[0])};
  for (int i = 0; i < 10; ++i) {
    const Tensor g = Tensor::of({{std::sin(i + 1.0), std::cos(i + 1.0)}});
    adam_step(s, plain, std::vector<Tensor>{g}, AdamHyper{.lr = 0.01});
    x = diff.step(x, std::vector<Var>{Var(g)});
  }
  EXPECT_NEAR(x[0].value()[0], plain[0][0], 1e-9);
  EXPECT_NEAR(x[0].value()[1], plain[0][1], 1e-9);
}

TEST(DifferentiableAdam, GradientFlowsThroughUnrolledSteps) {
  Rng rng = make_rng({22});
  const Tensor a = testing::random_tensor(rng, 3, 3);
  const testing::OpInstance inst{{testing::random_tensor(rng, 3, 1)}, [a](std::span<const Var> x) {
                                   DifferentiableAdam adam(AdamHyper{.lr = 0.1});
                                   std::vector<Var> xs{x[0]};
                                   for (int k = 0; k < 3; ++k) {
                                     const Var f = sum(softplus(matmul(Var(a), xs[0])));
                                     xs = adam.step(xs, Tape::grad(f, xs, GradMode::kCreateGraph));
                                   }
                                   return sum(mul(xs[0], xs[0]));
                                 }};
  EXPECT_LT(testing::first_order_error(inst, rng), 1e-5);
}

}  // namespace
}  // namespace antehoc
