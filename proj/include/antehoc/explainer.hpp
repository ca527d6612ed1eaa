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

// Edge-influence explainer: a plain GCN encodes nodes, each edge is
// represented by [max(h_i, h_j); min(h_i, h_j)] and scored by a sigmoid unit.

#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "antehoc/autodiff.hpp"
#include "antehoc/errors.hpp"
#include "antehoc/gnn.hpp"
#include "antehoc/graph.hpp"

namespace antehoc {

inline ModelDims explainer_dims(std::size_t input, std::size_t width = 20) {
  return ModelDims{.input = input, .width = width, .layers = 3, .head_in_factor = 2, .output = 1};
}

/// Explainer parameters Phi for a run seed.
inline ModelParams init_explainer(const ModelDims& dims, std::uint64_t seed) {
  return init_params(dims, seed, 2);
}

/// [max(a, b); min(a, b)] row-wise; symmetric in its arguments.
inline Var edge_representation(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("edge_representation: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  return concat_cols(maximum(a, b), minimum(a, b));
}

/// Stacked influences (E x 1) for every canonical edge of the batch, in
/// batch edge order. Each value is strictly inside (0, 1) unless the logit
/// saturates in floating point.
inline Var influence(const GraphBatch& b, std::span<const Var> phi) {
  if (phi.empty() || phi[0].rows() != b.features.cols()) {
    throw ShapeError("influence: feature width " + std::to_string(b.features.cols()) +
                     " does not match the explainer");
  }
  const std::size_t n = phi.size();
  if (phi[n - 2].rows() != 2 * phi[n - 3].cols()) {
    throw ShapeError("influence: head input must be twice the embedding width");
  }
  const Propagation plain = make_propagation(b, Var());
  const Var h = gcn_encode(plain, Var(b.features), phi);
  const Var rep = edge_representation(gather_rows(h, b.edge_u), gather_rows(h, b.edge_v));
  return sigmoid(add_row(matmul(rep, phi[n - 2]), phi[n - 1]));
}

/// Per-graph influence vectors aligned with each graph's canonical edges.
struct EdgeInfluence {
  std::vector<std::vector<double>> values;
};

inline EdgeInfluence influence_values(const Dataset& ds, std::span<const std::size_t> indices,
                                      const ModelParams& phi) {
  const GraphBatch b = GraphBatch::of(ds, indices);
  const auto vars = phi.constants();
  const Tensor z = influence(b, vars).value();
  EdgeInfluence out;
  for (std::size_t g = 0; g < b.num_graphs; ++g) out.values.push_back(b.edge_slice(z, g));
  return out;
}

inline std::vector<double> influence_values(const Graph& g, const ModelParams& phi) {
  const GraphBatch b = GraphBatch::of(g);
  const auto vars = phi.constants();
  return influence(b, vars).value().values();
}

/// JSON-lines: {"graph_index": i, "edges": [[u,v],...], "influence": [...]}.
inline void save_explanations(const Dataset& ds, std::span<const std::size_t> indices,
                              const EdgeInfluence& z, const std::filesystem::path& path) {
  if (z.values.size() != indices.size()) throw ContractError("save_explanations: size mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Graph& g = ds.graphs.at(indices[k]);
    nlohmann::json j;
    j["graph_index"] = indices[k];
    nlohmann::json edges = nlohmann::json::array();
    for (const Edge& e : g.edges) edges.push_back({e.u, e.v});
    j["edges"] = std::move(edges);
    j["influence"] = z.values[k];
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

struct ExplanationRecord {
  std::size_t graph_index = 0;
  std::vector<Edge> edges;
  std::vector<double> influence;
};

inline std::vector<ExplanationRecord> load_explanations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<ExplanationRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), line);
    }
    ExplanationRecord r;
    try {
      r.graph_index = j.at("graph_index").get<std::size_t>();
      for (const auto& e : j.at("edges")) r.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
      r.influence = j.at("influence").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("line " + std::to_string(line) + ": " + e.what());
    }
    if (r.influence.size() != r.edges.size()) {
      throw SchemaError("line " + std::to_string(line) + ": influence and edges differ in length");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace antehoc
