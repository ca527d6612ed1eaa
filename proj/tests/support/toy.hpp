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

// Small datasets for tests that train.

#pragma once

#include "antehoc/graph.hpp"
#include "antehoc/random.hpp"

namespace antehoc::testing {

/// Linearly separable graphs: feature 0 of every node is +1 for label 1 and
/// -1 for label 0, the rest is noise. Labels alternate.
inline Dataset separable_dataset(std::size_t num_graphs, std::size_t nodes, std::size_t dim,
                                 std::uint64_t seed) {
  Rng rng = make_rng({seed, 0x70f});
  Dataset ds{"separable", TaskKind::kClassification, dim, {}};
  for (std::size_t i = 0; i < num_graphs; ++i) {
    Graph g;
    g.num_nodes = nodes;
    g.label = static_cast<double>(i % 2);
    g.edges = antehoc::detail::erdos_renyi_edges(nodes, 0.4, rng);
    g.features = Tensor(nodes, dim);
    for (std::size_t n = 0; n < nodes; ++n) {
      g.features(n, 0) = g.label == 1.0 ? 1.0 : -1.0;
      for (std::size_t d = 1; d < dim; ++d) g.features(n, d) = standard_normal(rng);
    }
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

/// A desk-sized planted-clique problem that trains in well under a second
/// per outer step.
inline PlantedCliqueData small_clique(std::uint64_t seed = 0, std::size_t graphs = 20) {
  return generate_planted_clique(
      {.num_graphs = graphs, .num_nodes = 12, .edge_prob = 0.2, .clique_size = 5, .feature_dim = 4, .seed = seed});
}

/// The first split (over seeds 0, 1, ...) whose val and test parts both
/// hold two classes, so AUC is defined on them.
inline SplitIndices two_class_split(const Dataset& ds) {
  auto mixed = [&](const std::vector<std::size_t>& idx) {
    bool pos = false, neg = false;
    for (std::size_t i : idx) (ds.graphs[i].label == 1.0 ? pos : neg) = true;
    return pos && neg;
  };
  for (std::uint64_t seed = 0;; ++seed) {
    SplitIndices s = split(ds, seed);
    if (mixed(s.val) && mixed(s.test)) return s;
  }
}

}  // namespace antehoc::testing
