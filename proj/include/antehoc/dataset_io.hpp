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

// JSON-lines dataset files: one graph per line,
//   {"num_nodes": 3, "edges": [[0,1],[1,2]], "features": [[...],...], "label": 1}
// Ground-truth files are parallel, one edge array per line.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "antehoc/errors.hpp"
#include "antehoc/graph.hpp"

namespace antehoc {

namespace detail {

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError("line " + std::to_string(line) + ": missing field \"" + key + "\"");
  }
  return *it;
}

inline Edge edge_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    throw SchemaError("line " + std::to_string(line) + ": edge must be [u, v] with u, v >= 0");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace detail

inline Graph graph_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw SchemaError("line " + std::to_string(line) + ": expected a JSON object");
  Graph g;
  const auto& nn = detail::require_field(j, "num_nodes", line);
  if (!nn.is_number_unsigned()) throw SchemaError("line " + std::to_string(line) + ": bad num_nodes");
  g.num_nodes = nn.get<std::size_t>();
  const auto& edges = detail::require_field(j, "edges", line);
  if (!edges.is_array()) throw SchemaError("line " + std::to_string(line) + ": edges must be an array");
  for (const auto& e : edges) {
    g.edges.push_back(detail::edge_from_json(e, line));
  }
  const auto& feats = detail::require_field(j, "features", line);
  if (!feats.is_array() || feats.size() != g.num_nodes) {
    throw SchemaError("line " + std::to_string(line) + ": features must have one row per node");
  }
  const std::size_t d = g.num_nodes == 0 ? 0 : feats[0].size();
  std::vector<double> data;
  data.reserve(g.num_nodes * d);
  for (const auto& row : feats) {
    if (!row.is_array() || row.size() != d) {
      throw SchemaError("line " + std::to_string(line) + ": ragged feature rows");
    }
    for (const auto& v : row) {
      if (!v.is_number()) throw SchemaError("line " + std::to_string(line) + ": non-numeric feature");
      data.push_back(v.get<double>());
    }
  }
  g.features = Tensor(g.num_nodes, d, std::move(data));
  const auto& label = detail::require_field(j, "label", line);
  if (!label.is_number()) throw SchemaError("line " + std::to_string(line) + ": label must be numeric");
  g.label = label.get<double>();
  try {
    g.canonicalize();
  } catch (const SchemaError& e) {
    throw SchemaError("line " + std::to_string(line) + ": " + e.what());
  }
  return g;
}

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["num_nodes"] = g.num_nodes;
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.u, e.v});
  j["edges"] = std::move(edges);
  nlohmann::json feats = nlohmann::json::array();
  for (std::size_t i = 0; i < g.features.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < g.features.cols(); ++k) row.push_back(g.features(i, k));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  if (g.label == static_cast<double>(static_cast<long long>(g.label))) {
    j["label"] = static_cast<long long>(g.label);
  } else {
    j["label"] = g.label;
  }
  return j;
}

/// Reads a dataset. When `task` is not given it is classification if every
/// label is 0 or 1 and regression otherwise.
inline Dataset load_jsonl(const std::filesystem::path& path,
                          std::optional<TaskKind> task = std::nullopt) {
  auto in = detail::open_for_read(path);
  Dataset ds;
  ds.name = path.stem().string();
  std::string text;
  std::size_t line = 0;
  bool dim_known = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), line);
    }
    Graph g = graph_from_json(j, line);
    if (!dim_known) {
      ds.feature_dim = g.features.cols();
      dim_known = true;
    } else if (g.features.cols() != ds.feature_dim) {
      throw SchemaError("line " + std::to_string(line) + ": feature_dim " +
                        std::to_string(g.features.cols()) + " differs from " +
                        std::to_string(ds.feature_dim));
    }
    ds.graphs.push_back(std::move(g));
  }
  if (task) {
    ds.task = *task;
  } else {
    const bool binary = std::all_of(ds.graphs.begin(), ds.graphs.end(),
                                    [](const Graph& g) { return g.label == 0.0 || g.label == 1.0; });
    ds.task = binary ? TaskKind::kClassification : TaskKind::kRegression;
  }
  ds.validate();
  return ds;
}

inline void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  for (const Graph& g : ds.graphs) out << graph_to_json(g).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline GroundTruth load_ground_truth(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  GroundTruth gt;
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
    if (!j.is_array()) throw SchemaError("line " + std::to_string(line) + ": expected an edge array");
    std::vector<Edge> edges;
    for (const auto& e : j) {
      const Edge raw = detail::edge_from_json(e, line);
      edges.push_back(Edge::canonical(raw.u, raw.v));
    }
    std::sort(edges.begin(), edges.end());
    gt.edges.push_back(std::move(edges));
  }
  return gt;
}

inline void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  for (const auto& edges : gt.edges) {
    nlohmann::json j = nlohmann::json::array();
    for (const Edge& e : edges) j.push_back({e.u, e.v});
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace antehoc
