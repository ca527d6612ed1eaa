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

// Explanation metrics: top-k extraction, reproducibility, stability,
// probability of sufficiency, overlap with ground truth, and the metric CSV.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "antehoc/bilevel.hpp"
#include "antehoc/errors.hpp"
#include "antehoc/explainer.hpp"
#include "antehoc/gnn.hpp"
#include "antehoc/graph.hpp"
#include "antehoc/metrics.hpp"
#include "antehoc/random.hpp"

namespace antehoc {

/// Edges kept from one graph, as positions into its canonical edge list
/// (ascending), and the smallest kept influence.
struct ExplanationSubgraph {
  std::size_t graph_index = 0;
  std::vector<std::size_t> kept;
  double threshold = 0.0;
};

/// Positions of the `k` largest influences; equal values go to the earlier
/// canonical edge. k larger than the edge count keeps everything.
inline std::vector<std::size_t> top_k_positions(std::span<const double> z, std::size_t k) {
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

/// ceil(p * |E|) edges, at least one for a graph with edges.
inline std::size_t fraction_count(double p, std::size_t num_edges) {
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("size fraction must lie in (0, 1]");
  if (num_edges == 0) return 0;
  // The 1e-12 slack keeps products such as 0.3 * 10 from rounding up.
  const double raw = p * static_cast<double>(num_edges) * (1.0 - 1e-12);
  const auto k = static_cast<std::size_t>(std::ceil(raw));
  return std::clamp<std::size_t>(k, 1, num_edges);
}

inline ExplanationSubgraph top_k_subgraph(std::size_t graph_index, std::span<const double> z,
                                          std::size_t k) {
  ExplanationSubgraph s;
  s.graph_index = graph_index;
  s.kept = top_k_positions(z, k);
  s.threshold = s.kept.empty() ? 0.0 : z[s.kept.back()];
  std::sort(s.kept.begin(), s.kept.end());
  return s;
}

inline ExplanationSubgraph top_fraction_subgraph(std::size_t graph_index, std::span<const double> z,
                                                 double p) {
  return top_k_subgraph(graph_index, z, fraction_count(p, z.size()));
}

/// The graph restricted to the kept edges; nodes, features and label stay.
inline Graph restrict_edges(const Graph& g, const ExplanationSubgraph& s) {
  Graph out;
  out.num_nodes = g.num_nodes;
  out.features = g.features;
  out.label = g.label;
  for (std::size_t e : s.kept) out.edges.push_back(g.edges.at(e));
  return out;
}

/// Every graph of the dataset reduced to its top-p explanation.
inline Dataset explanation_dataset(const Dataset& ds, const std::vector<std::vector<double>>& z,
                                   double p) {
  if (z.size() != ds.size()) throw ContractError("explanation_dataset: one influence vector per graph");
  Dataset out{ds.name + "_explained", ds.task, ds.feature_dim, {}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (z[i].size() != ds.graphs[i].num_edges()) {
      throw ContractError("explanation_dataset: influence length differs from edge count");
    }
    out.graphs.push_back(restrict_edges(ds.graphs[i], top_fraction_subgraph(i, z[i], p)));
  }
  return out;
}

inline std::vector<std::vector<double>> all_influences(const Dataset& ds, const ModelParams& phi) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  return influence_values(ds, all, phi).values;
}

/// Uniform random influences, a ranking control.
inline std::vector<std::vector<double>> random_influences(const Dataset& ds, std::uint64_t seed) {
  Rng rng = make_rng({seed, 0x7a11d0ULL});
  std::vector<std::vector<double>> z;
  for (const Graph& g : ds.graphs) {
    std::vector<double> v(g.num_edges());
    for (double& x : v) x = uniform01(rng);
    z.push_back(std::move(v));
  }
  return z;
}

/// Test metric of a fresh plain predictor trained only on the top-p
/// explanation subgraphs.
inline double reproducibility(const Dataset& ds, const SplitIndices& splits,
                              const std::vector<std::vector<double>>& z, double p,
                              const TrainConfig& c) {
  const Dataset sub = explanation_dataset(ds, z, p);
  const ModelParams theta = train_plain_gnn(sub, splits, c);
  return task_metric(ds.task, predict(sub, splits.test, nullptr, theta), labels_of(sub, splits.test));
}

inline double reproducibility(const Dataset& ds, const SplitIndices& splits, const ModelParams& phi,
                              double p, const TrainConfig& c) {
  return reproducibility(ds, splits, all_influences(ds, phi), p, c);
}

/// Test metric of the plain predictor on the unreduced data.
inline double plain_baseline(const Dataset& ds, const SplitIndices& splits, const TrainConfig& c) {
  const ModelParams theta = train_plain_gnn(ds, splits, c);
  return task_metric(ds.task, predict(ds, splits.test, nullptr, theta), labels_of(ds, splits.test));
}

// ---------------------------------------------------------------------------
// Stability

/// For each edge of `original`, its position in `noisy`. Throws when an
/// original edge is missing from the noisy graph.
inline std::vector<std::size_t> align_edges(const Graph& original, const Graph& noisy) {
  std::vector<std::size_t> map;
  map.reserve(original.num_edges());
  for (const Edge& e : original.edges) {
    const auto pos = noisy.edge_index(e.u, e.v);
    if (!pos) throw ContractError("align_edges: original edge missing from the noisy graph");
    map.push_back(*pos);
  }
  return map;
}

struct StabilityResult {
  double cosine_distance = 0.0;
  double pearson = 0.0;
};

/// Plain vectors. Cosine distance needs nonzero norms, Pearson nonzero variance.
inline StabilityResult stability(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("stability: vectors differ in length");
  if (a.empty()) throw UndefinedMetricError("stability: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw UndefinedMetricError("stability: zero vector");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) throw UndefinedMetricError("stability: pearson undefined for a constant vector");
  return {1.0 - dot / std::sqrt(na * nb), cov / std::sqrt(va * vb)};
}

/// Per-graph influences on a dataset and its noisy variant, compared on the
/// original edges only.
inline StabilityResult stability(const std::vector<std::vector<double>>& z_original,
                                 const std::vector<std::vector<double>>& z_noisy,
                                 const std::vector<std::vector<std::size_t>>& edge_maps) {
  if (z_original.size() != z_noisy.size() || z_original.size() != edge_maps.size()) {
    throw ContractError("stability: inputs must have one entry per graph");
  }
  std::vector<double> a, b;
  for (std::size_t g = 0; g < z_original.size(); ++g) {
    if (edge_maps[g].size() != z_original[g].size()) {
      throw ContractError("stability: edge map does not cover the original edges");
    }
    for (std::size_t e = 0; e < edge_maps[g].size(); ++e) {
      a.push_back(z_original[g][e]);
      b.push_back(z_noisy[g].at(edge_maps[g][e]));
    }
  }
  return stability(a, b);
}

// ---------------------------------------------------------------------------
// Faithfulness

namespace detail {

inline double logit_with_mask(const Graph& g, const std::vector<double>& z, const ModelParams& theta) {
  return forward(g, z, theta).predictions.value().item();
}

}  // namespace detail

/// Probability of sufficiency: share of graphs whose hard class is unchanged
/// when every edge outside the top-k explanation gets influence 0.
inline double faithfulness_pos(const Dataset& ds, std::span<const std::size_t> indices,
                               const ModelParams& phi, const ModelParams& theta, std::size_t k) {
  if (ds.task != TaskKind::kClassification) {
    throw UndefinedMetricError("faithfulness is defined for classification only");
  }
  if (k < 1) throw ParameterError("faithfulness_pos: k must be >= 1");
  if (indices.empty()) throw UndefinedMetricError("faithfulness_pos: no graphs");
  std::size_t same = 0;
  for (std::size_t i : indices) {
    const Graph& g = ds.graphs.at(i);
    const std::vector<double> z = influence_values(g, phi);
    std::vector<double> masked(z.size(), 0.0);
    for (std::size_t e : top_k_positions(z, k)) masked[e] = z[e];
    const bool full = detail::logit_with_mask(g, z, theta) > 0.0;
    const bool part = detail::logit_with_mask(g, masked, theta) > 0.0;
    same += full == part ? 1 : 0;
  }
  return static_cast<double>(same) / static_cast<double>(indices.size());
}

/// Same comparison with k edges drawn uniformly at random as the explanation.
inline double faithfulness_random(const Dataset& ds, std::span<const std::size_t> indices,
                                  const ModelParams& phi, const ModelParams& theta, std::size_t k,
                                  std::uint64_t seed) {
  if (ds.task != TaskKind::kClassification) {
    throw UndefinedMetricError("faithfulness is defined for classification only");
  }
  if (indices.empty()) throw UndefinedMetricError("faithfulness_random: no graphs");
  Rng rng = make_rng({seed, 0xfa17ULL});
  std::size_t same = 0;
  for (std::size_t i : indices) {
    const Graph& g = ds.graphs.at(i);
    const std::vector<double> z = influence_values(g, phi);
    std::vector<std::size_t> pos(z.size());
    std::iota(pos.begin(), pos.end(), 0);
    shuffle(pos, rng);
    std::vector<double> masked(z.size(), 0.0);
    for (std::size_t j = 0; j < std::min(k, pos.size()); ++j) masked[pos[j]] = z[pos[j]];
    same += (detail::logit_with_mask(g, z, theta) > 0.0) == (detail::logit_with_mask(g, masked, theta) > 0.0);
  }
  return static_cast<double>(same) / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------------------
// Ground truth overlap

/// Mean over label-1 graphs with a known explanation of the share of the
/// top-|GT| edges that are ground-truth edges.
inline double explanation_overlap(const Dataset& ds, std::span<const std::size_t> indices,
                                  const std::vector<std::vector<double>>& z,
                                  const GroundTruth& truth) {
  if (truth.edges.size() != ds.size()) throw ContractError("explanation_overlap: ground truth missing");
  if (z.size() != indices.size()) throw ContractError("explanation_overlap: one influence vector per graph");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Graph& g = ds.graphs.at(indices[k]);
    const auto& gt = truth.edges[indices[k]];
    if (g.label != 1.0 || gt.empty()) continue;
    std::size_t hits = 0;
    for (std::size_t e : top_k_positions(z[k], gt.size())) {
      hits += std::binary_search(gt.begin(), gt.end(), g.edges[e]) ? 1 : 0;
    }
    total += static_cast<double>(hits) / static_cast<double>(gt.size());
    ++counted;
  }
  if (counted == 0) throw UndefinedMetricError("explanation_overlap: no label-1 graph with ground truth");
  return total / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricReport {
  std::string dataset;
  std::string method;
  std::string seed;  // a run seed, or "mean" / "std" on aggregate rows
  std::string metric;
  double value = 0.0;
  std::string config_digest;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline Aggregate aggregate(std::span<const double> v) {
  if (v.empty()) throw UndefinedMetricError("aggregate: no values");
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / n)};
}

/// Appends a "mean" and a "std" row for every (dataset, method, metric).
inline std::vector<MetricReport> with_aggregates(std::vector<MetricReport> rows) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::string> digest;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const MetricReport& r : rows) {
    auto key = std::make_tuple(r.dataset, r.method, r.metric);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(r.value);
    digest[key] = r.config_digest;
  }
  for (const auto& key : order) {
    const Aggregate a = aggregate(groups[key]);
    const auto& [d, m, name] = key;
    rows.push_back({d, m, "mean", name, a.mean, digest[key]});
    rows.push_back({d, m, "std", name, a.std, digest[key]});
  }
  return rows;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline void write_metric_csv(const std::vector<MetricReport>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "dataset,method,seed,metric,value,config_digest\r\n";
  for (const MetricReport& r : rows) {
    out << detail::csv_field(r.dataset) << ',' << detail::csv_field(r.method) << ','
        << detail::csv_field(r.seed) << ',' << detail::csv_field(r.metric) << ','
        << detail::format_double(r.value) << ',' << detail::csv_field(r.config_digest) << "\r\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace antehoc
