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
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include <gtest/gtest.h>

#include "antehoc/eval.hpp"
#include "support/toy.hpp"

namespace antehoc {
namespace {

using V = std::vector<double>;

TEST(TopK, LargestFirstWithStableTies) {
  EXPECT_EQ(top_k_positions(V{0.1, 0.9, 0.5, 0.9}, 2), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(top_k_positions(V{0.5, 0.5, 0.5}, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(top_k_positions(V{0.2, 0.1}, 10).size(), 2u);
  const ExplanationSubgraph s = top_k_subgraph(4, V{0.3, 0.8, 0.6}, 2);
  EXPECT_EQ(s.kept, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(s.threshold, 0.6);
}

TEST(TopK, FractionCountIsCeiling) {
  EXPECT_EQ(fraction_count(0.3, 10), 3u);
  EXPECT_EQ(fraction_count(0.31, 10), 4u);
  EXPECT_EQ(fraction_count(0.01, 10), 1u);
  EXPECT_EQ(fraction_count(1.0, 7), 7u);
  EXPECT_EQ(fraction_count(0.5, 0), 0u);
  EXPECT_THROW(fraction_count(0.0, 3), ParameterError);
  EXPECT_THROW(fraction_count(1.5, 3), ParameterError);
}

TEST(ExplanationDataset, KeepsCeilOfFractionPerGraph) {
  const auto data = testing::small_clique(1);
  const auto z = random_influences(data.dataset, 3);
  for (double p : {0.1, 0.3, 0.5, 1.0}) {
    const Dataset sub = explanation_dataset(data.dataset, z, p);
    for (std::size_t i = 0; i < sub.size(); ++i) {
      const std::size_t e = data.dataset.graphs[i].num_edges();
      EXPECT_EQ(sub.graphs[i].num_edges(), static_cast<std::size_t>(std::ceil(p * e - 1e-9)));
      EXPECT_EQ(sub.graphs[i].features, data.dataset.graphs[i].features);
    }
  }
  EXPECT_EQ(explanation_dataset(data.dataset, z, 1.0).graphs, data.dataset.graphs);
}

TEST(Reproducibility, FullFractionEqualsThePlainBaseline) {
  const auto data = testing::small_clique(2, 40);
  const SplitIndices s = testing::two_class_split(data.dataset);
  TrainConfig c;
  c.width = 4;
  c.inner_steps = 3;
  c.outer_steps = 4;
  c.inner_lr = 0.01;
  const auto z = random_influences(data.dataset, 5);
  EXPECT_EQ(reproducibility(data.dataset, s, z, 1.0, c), plain_baseline(data.dataset, s, c));
}

TEST(Stability, IdenticalVectors) {
  const V v{0.1, 0.7, 0.3};
  const StabilityResult r = stability(v, v);
  EXPECT_NEAR(r.cosine_distance, 0.0, 1e-15);
  EXPECT_NEAR(r.pearson, 1.0, 1e-15);
}

TEST(Stability, OrthogonalAndAnticorrelated) {
  EXPECT_NEAR(stability(V{1, 0, 1, 0}, V{0, 1, 0, 1}).cosine_distance, 1.0, 1e-15);
  EXPECT_NEAR(stability(V{1, 2, 3}, V{3, 2, 1}).pearson, -1.0, 1e-15);
}

TEST(Stability, DegenerateInputsAreUndefined) {
  EXPECT_THROW(stability(V{0, 0}, V{1, 2}), UndefinedMetricError);
  EXPECT_THROW(stability(V{1, 1, 1}, V{1, 2, 3}), UndefinedMetricError);
  EXPECT_THROW(stability(V{}, V{}), UndefinedMetricError);
  EXPECT_THROW(stability(V{1}, V{1, 2}), ShapeError);
}

TEST(Stability, AlignmentFollowsTheOriginalEdges) {
  Graph g;
  g.num_nodes = 4;
  g.edges = {{0, 1}, {2, 3}};
  Graph noisy = g;
  noisy.edges = {{0, 1}, {0, 3}, {1, 2}, {2, 3}};
  EXPECT_EQ(align_edges(g, noisy), (std::vector<std::size_t>{0, 3}));
  const StabilityResult r = stability({V{0.2, 0.9}}, {V{0.2, 0.5, 0.5, 0.9}}, {align_edges(g, noisy)});
  EXPECT_NEAR(r.pearson, 1.0, 1e-15);
  Graph other = g;
  other.edges = {{0, 1}};
  EXPECT_THROW(align_edges(g, other), ContractError);
}

TEST(Stability, InfluenceIsStableUnderNoNoise) {
  const auto data = testing::small_clique(3);
  const ModelParams phi = init_explainer(explainer_dims(4, 5), 1);
  const Dataset same = add_noise_edges(data.dataset, 0, 4);
  std::vector<std::vector<std::size_t>> maps;
  for (std::size_t i = 0; i < same.size(); ++i) maps.push_back(align_edges(data.dataset.graphs[i], same.graphs[i]));
  const StabilityResult r = stability(all_influences(data.dataset, phi), all_influences(same, phi), maps);
  EXPECT_NEAR(r.cosine_distance, 0.0, 1e-12);
  EXPECT_NEAR(r.pearson, 1.0, 1e-12);
}

TEST(Faithfulness, KeepingEveryEdgeIsAlwaysSufficient) {
  const auto data = testing::small_clique(4);
  const ModelParams phi = init_explainer(explainer_dims(4, 5), 2);
  const ModelParams theta = reinitialize(ModelDims{.input = 4, .width = 5}, 3);
  std::vector<std::size_t> all(data.dataset.size());
  std::iota(all.begin(), all.end(), 0);
  std::size_t most = 0;
  for (const Graph& g : data.dataset.graphs) most = std::max(most, g.num_edges());
  EXPECT_EQ(faithfulness_pos(data.dataset, all, phi, theta, most), 1.0);
  EXPECT_EQ(faithfulness_random(data.dataset, all, phi, theta, most, 7), 1.0);
  const double some = faithfulness_pos(data.dataset, all, phi, theta, 2);
  EXPECT_GE(some, 0.0);
  EXPECT_LE(some, 1.0);
  EXPECT_THROW(faithfulness_pos(data.dataset, all, phi, theta, 0), ParameterError);
}

TEST(Overlap, GroundTruthIndicatorScoresOne) {
  const auto data = testing::small_clique(5);
  std::vector<std::size_t> all(data.dataset.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<double>> z;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Graph& g = data.dataset.graphs[i];
    const auto& gt = data.ground_truth.edges[i];
    V v(g.num_edges(), 0.0);
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      v[e] = std::binary_search(gt.begin(), gt.end(), g.edges[e]) ? 1.0 : 0.0;
    z.push_back(v);
  }
  EXPECT_EQ(explanation_overlap(data.dataset, all, z, data.ground_truth), 1.0);
}

TEST(Overlap, RandomRankingScoresTheBaseRate) {
  const auto data = generate_planted_clique({.num_graphs = 400, .num_nodes = 20, .edge_prob = 0.2, .clique_size = 5, .feature_dim = 2, .seed = 6});
  std::vector<std::size_t> all(data.dataset.size());
  std::iota(all.begin(), all.end(), 0);
  double base = 0.0, n = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (data.dataset.graphs[i].label != 1.0) continue;
    base += static_cast<double>(data.ground_truth.edges[i].size()) /
            static_cast<double>(data.dataset.graphs[i].num_edges());
    n += 1.0;
  }
  const double overlap =
      explanation_overlap(data.dataset, all, random_influences(data.dataset, 1), data.ground_truth);
  EXPECT_NEAR(overlap, base / n, 0.03);
}

TEST(Reports, AggregatesUsePopulationStd) {
  const Aggregate a = aggregate(V{1, 2, 3, 4});
  EXPECT_EQ(a.mean, 2.5);
  EXPECT_DOUBLE_EQ(a.std, std::sqrt(1.25));
  EXPECT_THROW(aggregate(V{}), UndefinedMetricError);
}

TEST(Reports, CsvHasOneRowPerValuePlusAggregates) {
  std::vector<MetricReport> rows;
  for (const char* seed : {"0", "1", "2"}) {
    rows.push_back({"clique", "rage", seed, "auc", 0.5, "abc"});
    rows.push_back({"clique", "rage", seed, "precision", 0.25, "abc"});
  }
  rows = with_aggregates(rows);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[6].seed, "mean");
  EXPECT_EQ(rows[6].metric, "auc");
  EXPECT_EQ(rows[7].seed, "std");
  EXPECT_EQ(rows[7].value, 0.0);

  const auto path = std::filesystem::temp_directory_path() / "antehoc_metrics.csv";
  rows.push_back({"with,comma", "rage", "0", "auc", 0.1, "abc"});
  write_metric_csv(rows, path);
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "dataset,method,seed,metric,value,config_digest\r");
  std::getline(in, line);
  EXPECT_EQ(line, "clique,rage,0,auc,0.5,abc\r");
  std::size_t count = 1;
  std::string last;
  while (std::getline(in, line)) ++count, last = line;
  EXPECT_EQ(count, rows.size());
  EXPECT_EQ(last, "\"with,comma\",rage,0,auc,0.1,abc\r");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace antehoc
