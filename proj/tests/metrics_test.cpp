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

#include "antehoc/metrics.hpp"
#include "antehoc/random.hpp"

namespace antehoc {
namespace {

using V = std::vector<double>;

TEST(Auc, SmallExample) {
  EXPECT_DOUBLE_EQ(auc(V{0.1, 0.4, 0.35, 0.8}, V{0, 0, 1, 1}), 0.75);
}

TEST(Auc, PerfectAndReversed) {
  EXPECT_EQ(auc(V{1, 2, 3, 4}, V{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(V{4, 3, 2, 1}, V{0, 0, 1, 1}), 0.0);
}

TEST(Auc, TiesCountHalf) {
  EXPECT_EQ(auc(V{0.5, 0.5, 0.5, 0.5}, V{0, 1, 0, 1}), 0.5);
  EXPECT_EQ(auc(V{0.2, 0.5, 0.5}, V{0, 0, 1}), 0.75);
}

TEST(Auc, AgreesWithPairwiseCountOnRandomInputs) {
  Rng rng = make_rng({41});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    V s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 6));  // plenty of ties
      y[i] = static_cast<double>(i % 2);
    }
    shuffle(y, rng);
    EXPECT_DOUBLE_EQ(auc(s, y), auc_brute_force(s, y));
  }
}

TEST(Auc, InvariantUnderMonotoneTransforms) {
  Rng rng = make_rng({42});
  V s(30), y(30), t(30);
  for (std::size_t i = 0; i < 30; ++i) {
    s[i] = standard_normal(rng);
    y[i] = static_cast<double>(i % 3 == 0);
    t[i] = std::exp(3.0 * s[i]) + 7.0;
  }
  EXPECT_EQ(auc(s, y), auc(t, y));
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc(V{0.1, 0.2}, V{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auc(V{0.1, 0.2}, V{0, 0}), UndefinedMetricError);
  EXPECT_THROW(auc(V{0.1}, V{0, 1}), ShapeError);
  EXPECT_THROW(auc(V{0.1, 0.2}, V{0, 2}), DomainError);
}

TEST(AveragePrecision, HandComputed) {
  // Ranking: 1 0 1 0 -> precisions 1 and 2/3 at the two hits.
  EXPECT_DOUBLE_EQ(average_precision(V{0.9, 0.8, 0.7, 0.1}, V{1, 0, 1, 0}), (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_EQ(average_precision(V{3, 2, 1}, V{1, 1, 0}), 1.0);
  // One tied group holding everything.
  EXPECT_DOUBLE_EQ(average_precision(V{1, 1, 1, 1}, V{1, 0, 0, 0}), 0.25);
}

TEST(Regression, MseAndR2) {
  EXPECT_DOUBLE_EQ(mean_squared_error(V{1, 2, 3}, V{1, 4, 0}), (0.0 + 4.0 + 9.0) / 3.0);
  const V y{1, 2, 3, 6};
  EXPECT_EQ(r2_score(y, y), 1.0);
  EXPECT_DOUBLE_EQ(r2_score(V(4, 3.0), y), 0.0);
  EXPECT_THROW(r2_score(V{1, 1}, V{2, 2}), UndefinedMetricError);
  EXPECT_THROW(mean_squared_error(V{}, V{}), UndefinedMetricError);
}

}  // namespace
}  // namespace antehoc
