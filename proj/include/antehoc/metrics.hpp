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

// Scalar accuracy metrics: ROC AUC, average precision, MSE, R^2.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "antehoc/errors.hpp"

namespace antehoc {

namespace detail {

inline void check_binary(std::span<const double> scores, std::span<const double> labels,
                         const char* name, std::size_t& pos, std::size_t& neg) {
  if (scores.size() != labels.size()) {
    throw ShapeError(std::string(name) + ": " + std::to_string(scores.size()) + " scores, " +
                     std::to_string(labels.size()) + " labels");
  }
  pos = neg = 0;
  for (double y : labels) {
    if (y == 1.0) {
      ++pos;
    } else if (y == 0.0) {
      ++neg;
    } else {
      throw DomainError(std::string(name) + ": labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError(std::string(name) + " needs both classes, got " +
                               std::to_string(pos) + " positive and " + std::to_string(neg) +
                               " negative");
  }
}

/// Indices sorted by descending score; equal scores keep input order.
inline std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace detail

/// Probability that a random positive outscores a random negative, ties ½.
/// Computed from tie-aware ranks.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  std::size_t pos = 0, neg = 0;
  detail::check_binary(scores, labels, "auc", pos, neg);
  const auto idx = detail::order_desc(scores);
  // Walk groups of equal score from the top. Each positive in a group beats
  // every negative below the group and ties with the negatives inside it.
  double wins = 0.0;  // counted in halves to stay exact
  std::size_t neg_below = neg;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t p = 0, n = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1.0 ? p : n) += 1;
      ++j;
    }
    neg_below -= n;
    wins += 2.0 * static_cast<double>(p) * static_cast<double>(neg_below) +
            static_cast<double>(p) * static_cast<double>(n);
    i = j;
  }
  return wins / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

/// Pairwise definition, O(P*N). Used as a test oracle.
inline double auc_brute_force(std::span<const double> scores, std::span<const double> labels) {
  std::size_t pos = 0, neg = 0;
  detail::check_binary(scores, labels, "auc", pos, neg);
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      s += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return s / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Average precision: sum over thresholds of (R_k - R_{k-1}) * P_k, with
/// tied scores forming a single threshold.
inline double average_precision(std::span<const double> scores, std::span<const double> labels) {
  std::size_t pos = 0, neg = 0;
  detail::check_binary(scores, labels, "ap", pos, neg);
  const auto idx = detail::order_desc(scores);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t p = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] == 1.0) ++p;
      ++j;
    }
    tp += p;
    seen += j - i;
    if (p > 0) {
      ap += (static_cast<double>(p) / static_cast<double>(pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    }
    i = j;
  }
  return ap;
}

inline double mean_squared_error(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse: length mismatch");
  if (pred.empty()) throw UndefinedMetricError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

inline double r2_score(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("r2: length mismatch");
  if (pred.empty()) throw UndefinedMetricError("r2: empty input");
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) /
                      static_cast<double>(target.size());
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    res += (target[i] - pred[i]) * (target[i] - pred[i]);
    tot += (target[i] - mean) * (target[i] - mean);
  }
  if (tot == 0.0) throw UndefinedMetricError("r2: targets have zero variance");
  return 1.0 - res / tot;
}

}  // namespace antehoc
