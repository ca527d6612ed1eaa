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

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "antehoc/errors.hpp"
#include "antehoc/random.hpp"
#include "antehoc/tensor.hpp"

namespace antehoc {

/// Undirected edge in canonical form (u < v).
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  static Edge canonical(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected attributed graph with a graph-level label. Edges are stored
/// sorted and unique, so two graphs with the same structure compare equal.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  Tensor features;  // num_nodes x feature_dim
  double label = 0.0;

  std::size_t num_edges() const { return edges.size(); }

  /// Position of the canonical edge {a, b} in `edges`, if present.
  std::optional<std::size_t> edge_index(std::size_t a, std::size_t b) const {
    const Edge e = Edge::canonical(a, b);
    auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) return std::nullopt;
    return static_cast<std::size_t>(it - edges.begin());
  }
  bool has_edge(std::size_t a, std::size_t b) const { return edge_index(a, b).has_value(); }

  /// Sorts and deduplicates `edges` after canonicalising each pair. Throws on
  /// self-loops or out-of-range endpoints.
  void canonicalize() {
    for (Edge& e : edges) {
      if (e.u == e.v) throw SchemaError("self-loop on node " + std::to_string(e.u));
      e = Edge::canonical(e.u, e.v);
      if (e.v >= num_nodes) {
        throw SchemaError("edge endpoint " + std::to_string(e.v) + " out of range for " +
                          std::to_string(num_nodes) + " nodes");
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }

  void validate() const {
    if (features.rows() != num_nodes) {
      throw SchemaError("feature rows " + std::to_string(features.rows()) + " != num_nodes " +
                        std::to_string(num_nodes));
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Edge& e = edges[i];
      if (e.u >= e.v || e.v >= num_nodes) throw SchemaError("edge list is not canonical");
      if (i > 0 && !(edges[i - 1] < e)) throw SchemaError("edge list is not sorted and unique");
    }
  }

  friend bool operator==(const Graph&, const Graph&) = default;
};

enum class TaskKind { kClassification, kRegression };

inline const char* to_string(TaskKind t) {
  return t == TaskKind::kClassification ? "classification" : "regression";
}

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::kClassification;
  std::size_t feature_dim = 0;
  std::vector<Graph> graphs;

  std::size_t size() const { return graphs.size(); }

  void validate() const {
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const Graph& g = graphs[i];
      g.validate();
      if (g.features.cols() != feature_dim) {
        throw SchemaError("graph " + std::to_string(i) + " has feature_dim " +
                          std::to_string(g.features.cols()) + ", dataset has " +
                          std::to_string(feature_dim));
      }
      if (task == TaskKind::kClassification && g.label != 0.0 && g.label != 1.0) {
        throw SchemaError("graph " + std::to_string(i) + " has non-binary class label " +
                          std::to_string(g.label));
      }
    }
  }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out{name, task, feature_dim, {}};
    out.graphs.reserve(idx.size());
    for (std::size_t i : idx) out.graphs.push_back(graphs.at(i));
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Per-graph edges known to cause the label; empty where none is known.
struct GroundTruth {
  std::vector<std::vector<Edge>> edges;

  void validate(const Dataset& ds) const {
    if (edges.size() != ds.size()) throw SchemaError("ground truth is not parallel to the dataset");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      for (const Edge& e : edges[i]) {
        if (!ds.graphs[i].has_edge(e.u, e.v)) {
          throw SchemaError("ground-truth edge (" + std::to_string(e.u) + "," +
                            std::to_string(e.v) + ") missing from graph " + std::to_string(i));
        }
      }
    }
  }
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// ---------------------------------------------------------------------------
// Generators

enum class FeatureKind { kUniform, kNormal };

struct PlantedCliqueParams {
  std::size_t num_graphs = 100;
  std::size_t num_nodes = 100;
  double edge_prob = 0.1;
  std::size_t clique_size = 8;
  std::size_t feature_dim = 64;
  FeatureKind features = FeatureKind::kNormal;
  std::uint64_t seed = 0;
};

/// Size of the largest clique. Bron-Kerbosch with pivoting over bitsets.
inline std::size_t max_clique_size(const Graph& g) {
  const std::size_t n = g.num_nodes;
  const std::size_t words = (n + 63) / 64;
  using Bits = std::vector<std::uint64_t>;
  std::vector<Bits> adj(n, Bits(words, 0));
  for (const Edge& e : g.edges) {
    adj[e.u][e.v / 64] |= std::uint64_t{1} << (e.v % 64);
    adj[e.v][e.u / 64] |= std::uint64_t{1} << (e.u % 64);
  }
  auto count = [&](const Bits& b) {
    std::size_t c = 0;
    for (auto w : b) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  };
  std::size_t best = n > 0 ? 1 : 0;
  auto expand = [&](auto&& self, std::size_t depth, Bits p, Bits x) -> void {
    if (count(p) == 0) {
      if (count(x) == 0) best = std::max(best, depth);
      return;
    }
    if (depth + count(p) <= best) return;
    // Pivot: vertex of P u X with most neighbours in P.
    std::size_t pivot = 0, pivot_deg = 0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t bits = p[w] | x[w];
      while (bits) {
        const std::size_t v = w * 64 + static_cast<std::size_t>(__builtin_ctzll(bits));
        bits &= bits - 1;
        std::size_t d = 0;
        for (std::size_t k = 0; k < words; ++k)
          d += static_cast<std::size_t>(__builtin_popcountll(p[k] & adj[v][k]));
        if (d >= pivot_deg) {
          pivot_deg = d;
          pivot = v;
        }
      }
    }
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t cand = p[w] & ~adj[pivot][w];
      while (cand) {
        const std::size_t v = w * 64 + static_cast<std::size_t>(__builtin_ctzll(cand));
        cand &= cand - 1;
        Bits np(words), nx(words);
        for (std::size_t k = 0; k < words; ++k) {
          np[k] = p[k] & adj[v][k];
          nx[k] = x[k] & adj[v][k];
        }
        self(self, depth + 1, std::move(np), std::move(nx));
        p[v / 64] &= ~(std::uint64_t{1} << (v % 64));
        x[v / 64] |= std::uint64_t{1} << (v % 64);
      }
    }
  };
  Bits all(words, 0);
  for (std::size_t v = 0; v < n; ++v) all[v / 64] |= std::uint64_t{1} << (v % 64);
  expand(expand, 0, all, Bits(words, 0));
  return best;
}

namespace detail {

inline Tensor random_features(std::size_t n, std::size_t d, FeatureKind kind, Rng& rng) {
  Tensor x(n, d);
  for (double& v : x.data()) v = kind == FeatureKind::kUniform ? uniform01(rng) : standard_normal(rng);
  return x;
}

inline std::vector<Edge> erdos_renyi_edges(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < p) edges.push_back({i, j});
  return edges;
}

}  // namespace detail

struct PlantedCliqueData {
  Dataset dataset;
  GroundTruth ground_truth;
};

/// Erdos-Renyi graphs; exactly half of them (label 1) receive a clique on
/// `clique_size` random nodes, whose edges form the ground truth. A label-0
/// graph is redrawn if it already contains a clique of `clique_size` nodes.
inline PlantedCliqueData generate_planted_clique(const PlantedCliqueParams& p) {
  if (p.clique_size > p.num_nodes) {
    throw ParameterError("clique size " + std::to_string(p.clique_size) + " exceeds " +
                         std::to_string(p.num_nodes) + " nodes");
  }
  if (p.clique_size < 2) throw ParameterError("clique size must be at least 2");
  if (!(p.edge_prob >= 0.0 && p.edge_prob <= 1.0)) throw ParameterError("edge probability not in [0,1]");
  Rng rng = make_rng({p.seed, 0x9c11c0eULL});

  std::vector<int> labels(p.num_graphs, 0);
  for (std::size_t i = 0; i < p.num_graphs / 2; ++i) labels[i] = 1;
  shuffle(labels, rng);

  PlantedCliqueData out;
  out.dataset.name = "planted_clique";
  out.dataset.task = TaskKind::kClassification;
  out.dataset.feature_dim = p.feature_dim;
  for (std::size_t gi = 0; gi < p.num_graphs; ++gi) {
    Graph g;
    g.num_nodes = p.num_nodes;
    g.label = labels[gi];
    std::vector<Edge> truth;
    for (int attempt = 0;; ++attempt) {
      g.edges = detail::erdos_renyi_edges(p.num_nodes, p.edge_prob, rng);
      if (labels[gi] == 1 || max_clique_size(g) < p.clique_size) break;
      if (attempt > 100) throw ParameterError("clique size too small for this edge density");
    }
    if (labels[gi] == 1) {
      std::vector<std::size_t> nodes(p.num_nodes);
      for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
      for (std::size_t i = 0; i < p.clique_size; ++i) {
        std::swap(nodes[i], nodes[i + uniform_index(rng, p.num_nodes - i)]);
      }
      nodes.resize(p.clique_size);
      std::sort(nodes.begin(), nodes.end());
      for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = a + 1; b < nodes.size(); ++b) truth.push_back({nodes[a], nodes[b]});
      g.edges.insert(g.edges.end(), truth.begin(), truth.end());
      g.canonicalize();
    }
    g.features = detail::random_features(p.num_nodes, p.feature_dim, p.features, rng);
    out.dataset.graphs.push_back(std::move(g));
    out.ground_truth.edges.push_back(std::move(truth));
  }
  return out;
}

/// Adds exactly `count` new uniformly random edges to every graph (rejection
/// sampling over absent pairs). Labels and existing edges are untouched.
inline Dataset add_noise_edges(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  Dataset out = ds;
  if (count == 0) return out;
  Rng rng = make_rng({seed, 0x4015eULL});
  for (std::size_t gi = 0; gi < out.graphs.size(); ++gi) {
    Graph& g = out.graphs[gi];
    const std::size_t n = g.num_nodes;
    const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
    if (pairs - g.edges.size() < count) {
      throw ParameterError("graph " + std::to_string(gi) + " cannot host " + std::to_string(count) +
                           " more edges");
    }
    std::vector<Edge> added;
    while (added.size() < count) {
      const std::size_t a = uniform_index(rng, n);
      const std::size_t b = uniform_index(rng, n);
      if (a == b) continue;
      const Edge e = Edge::canonical(a, b);
      if (g.has_edge(e.u, e.v) || std::find(added.begin(), added.end(), e) != added.end()) continue;
      added.push_back(e);
    }
    g.edges.insert(g.edges.end(), added.begin(), added.end());
    g.canonicalize();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

/// Seeded shuffle, then 80% train, 10% validation, 10% test.
inline SplitIndices split(const Dataset& ds, std::uint64_t seed = 0) {
  const std::size_t n = ds.size();
  if (n < 10) throw ParameterError("split needs at least 10 graphs, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = make_rng({seed, 0x5b117ULL});
  shuffle(perm, rng);
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  return s;
}

/// Fresh 50/50 partition of the training indices for one outer step.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> resplit_train_support(
    const std::vector<std::size_t>& train, std::uint64_t run_seed, std::uint64_t outer_step) {
  if (train.size() < 2) throw ParameterError("need at least 2 training graphs to carve a support set");
  std::vector<std::size_t> perm = train;
  Rng rng = make_rng({run_seed, outer_step, 0x50990e7ULL});
  shuffle(perm, rng);
  const std::size_t half = perm.size() / 2;
  return {std::vector<std::size_t>(perm.begin(), perm.begin() + half),
          std::vector<std::size_t>(perm.begin() + half, perm.end())};
}

}  // namespace antehoc
