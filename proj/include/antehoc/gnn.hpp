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

// Influence-weighted GCN: three graph convolutions with relu in between, a
// max-pool readout and a linear head. Propagation on a batch is done over the
// disjoint union of its graphs with a sparse entry list; `reference_forward`
// is a separate dense implementation of the same model.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "antehoc/autodiff.hpp"
#include "antehoc/errors.hpp"
#include "antehoc/graph.hpp"
#include "antehoc/random.hpp"
#include "antehoc/tensor.hpp"

namespace antehoc {

/// Named parameter tensors in a fixed order: W0 b0 W1 b1 W2 b2 Wh bh.
struct ModelParams {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  std::size_t size() const { return tensors.size(); }
  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
  }
  bool all_finite() const {
    for (const Tensor& t : tensors) {
      if (!t.all_finite()) return false;
    }
    return true;
  }

  std::vector<Var> leaves(Tape& tape) const {
    std::vector<Var> out;
    for (const Tensor& t : tensors) out.push_back(tape.leaf(t));
    return out;
  }
  std::vector<Var> constants() const {
    std::vector<Var> out;
    for (const Tensor& t : tensors) out.emplace_back(t);
    return out;
  }
  /// Copies values back from `vars`, which must align with `tensors`.
  void assign(std::span<const Var> vars) {
    if (vars.size() != tensors.size()) throw ContractError("ModelParams::assign: size mismatch");
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i].shape() != tensors[i].shape()) {
        throw ShapeError("ModelParams::assign: shape mismatch for " + names[i]);
      }
      tensors[i] = vars[i].value();
    }
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Layer widths. `head_in_factor` is 1 for the predictor and 2 for the
/// explainer, whose head reads concatenated edge representations.
struct ModelDims {
  std::size_t input = 0;
  std::size_t width = 20;
  std::size_t layers = 3;
  std::size_t head_in_factor = 1;
  std::size_t output = 1;
};

namespace detail {

inline Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& x : w.data()) x = uniform(rng, -a, a);
  return w;
}

}  // namespace detail

/// Fresh parameters: Glorot-uniform weights, zero biases. Deterministic in
/// (seed, salt).
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed, std::uint64_t salt = 0) {
  if (dims.input == 0 || dims.width == 0 || dims.layers == 0) {
    throw ParameterError("init_params: dimensions must be positive");
  }
  Rng rng = make_rng({seed, salt, 0x9e37});
  ModelParams p;
  std::size_t in = dims.input;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    p.names.push_back("conv" + std::to_string(l) + ".weight");
    p.tensors.push_back(detail::glorot_uniform(in, dims.width, rng));
    p.names.push_back("conv" + std::to_string(l) + ".bias");
    p.tensors.emplace_back(1, dims.width);
    in = dims.width;
  }
  p.names.push_back("head.weight");
  p.tensors.push_back(detail::glorot_uniform(dims.width * dims.head_in_factor, dims.output, rng));
  p.names.push_back("head.bias");
  p.tensors.emplace_back(1, dims.output);
  return p;
}

/// Predictor parameters theta. Called before every inner loop.
inline ModelParams reinitialize(const ModelDims& dims, std::uint64_t seed) {
  return init_params(dims, seed, 1);
}

inline Var l2_penalty(std::span<const Var> params) {
  Var total;
  for (const Var& p : params) total = total.defined() ? add(total, l2_norm_sq(p)) : l2_norm_sq(p);
  return total.defined() ? total : Var(Tensor::scalar(0.0));
}

// ---------------------------------------------------------------------------
// Batches

/// Disjoint union of several graphs. Node i of graph g has global index
/// node_offsets[g] + i; the canonical edges of all graphs are concatenated in
/// order, so influence vectors of a batch are the per-graph vectors stacked.
struct GraphBatch {
  std::size_t num_graphs = 0;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::vector<std::size_t> node_offsets{0};
  std::vector<std::size_t> edge_offsets{0};
  Tensor features;
  Tensor labels;  // num_graphs x 1
  IndexList edge_u, edge_v;

  // Propagation entries (self-loops included), sorted by row then column.
  IndexList rows, cols;
  IndexList entry_edges;     // 2E: edge id of each directed copy
  IndexList entry_position;  // 2E: position of that copy among the entries
  Tensor self_indicator;     // entries x 1, 1 on self-loops

  std::size_t num_entries() const { return rows->size(); }

  static GraphBatch of(std::span<const Graph* const> graphs) {
    GraphBatch b;
    b.num_graphs = graphs.size();
    std::size_t d = graphs.empty() ? 0 : graphs[0]->features.cols();
    for (const Graph* g : graphs) {
      if (g->features.cols() != d) throw ShapeError("GraphBatch: feature widths differ");
      if (g->features.rows() != g->num_nodes) throw ShapeError("GraphBatch: feature rows != nodes");
      b.num_nodes += g->num_nodes;
      b.num_edges += g->edges.size();
      b.node_offsets.push_back(b.num_nodes);
      b.edge_offsets.push_back(b.num_edges);
    }
    std::vector<double> x;
    x.reserve(b.num_nodes * d);
    std::vector<double> y;
    std::vector<std::size_t> eu, ev;
    eu.reserve(b.num_edges);
    ev.reserve(b.num_edges);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      const Graph& g = *graphs[gi];
      x.insert(x.end(), g.features.data().begin(), g.features.data().end());
      y.push_back(g.label);
      for (const Edge& e : g.edges) {
        eu.push_back(b.node_offsets[gi] + e.u);
        ev.push_back(b.node_offsets[gi] + e.v);
      }
    }
    b.features = Tensor(b.num_nodes, d, std::move(x));
    b.labels = Tensor(b.num_graphs, 1, std::move(y));

    // Adjacency lists: (column, entry source) per row.
    struct Slot {
      std::size_t col;
      std::size_t source;  // 2E for a self-loop, otherwise directed copy id
    };
    std::vector<std::vector<Slot>> adj(b.num_nodes);
    const std::size_t E = b.num_edges;
    for (std::size_t i = 0; i < b.num_nodes; ++i) adj[i].push_back({i, 2 * E});
    for (std::size_t e = 0; e < E; ++e) {
      adj[eu[e]].push_back({ev[e], e});
      adj[ev[e]].push_back({eu[e], E + e});
    }
    std::vector<std::size_t> rows, cols, position(2 * E), edges(2 * E);
    std::vector<double> self;
    rows.reserve(2 * E + b.num_nodes);
    cols.reserve(2 * E + b.num_nodes);
    for (std::size_t i = 0; i < b.num_nodes; ++i) {
      auto& row = adj[i];
      std::sort(row.begin(), row.end(), [](const Slot& a, const Slot& c) { return a.col < c.col; });
      for (const Slot& s : row) {
        if (s.source < 2 * E) {
          position[s.source] = rows.size();
          edges[s.source] = s.source < E ? s.source : s.source - E;
          self.push_back(0.0);
        } else {
          self.push_back(1.0);
        }
        rows.push_back(i);
        cols.push_back(s.col);
      }
    }
    const std::size_t entries = self.size();
    b.self_indicator = Tensor(entries, 1, std::move(self));
    b.rows = make_index(std::move(rows));
    b.cols = make_index(std::move(cols));
    b.entry_edges = make_index(std::move(edges));
    b.entry_position = make_index(std::move(position));
    b.edge_u = make_index(std::move(eu));
    b.edge_v = make_index(std::move(ev));
    return b;
  }

  static GraphBatch of(const Graph& g) {
    const Graph* p = &g;
    return of(std::span<const Graph* const>(&p, 1));
  }

  static GraphBatch of(const Dataset& ds, std::span<const std::size_t> indices) {
    std::vector<const Graph*> gs;
    for (std::size_t i : indices) {
      if (i >= ds.size()) throw ContractError("GraphBatch: graph index out of range");
      gs.push_back(&ds.graphs[i]);
    }
    return of(gs);
  }

  /// Per-graph slice [edge_offsets[g], edge_offsets[g+1]) of a stacked
  /// influence column.
  std::vector<double> edge_slice(const Tensor& z, std::size_t g) const {
    return {z.data().begin() + static_cast<std::ptrdiff_t>(edge_offsets[g]),
            z.data().begin() + static_cast<std::ptrdiff_t>(edge_offsets[g + 1])};
  }
};

/// Normalised propagation weights D^-1/2 A_Z D^-1/2 as values on the batch
/// entry list. Degrees are computed from the weighted entries.
struct Propagation {
  IndexList rows, cols;
  Var weights;  // entries x 1
  std::size_t num_nodes = 0;
};

/// `z` is a stacked E x 1 influence column; an undefined `z` means Z = 1.
inline Propagation make_propagation(const GraphBatch& b, const Var& z) {
  const std::size_t E = b.num_edges;
  Var zc = z.defined() ? z : Var(Tensor(E, 1, 1.0));
  if (zc.shape() != Shape{E, 1}) {
    throw ContractError("make_propagation: influence has shape " + to_string(zc.shape()) +
                        ", batch has " + std::to_string(E) + " edges");
  }
  const std::size_t M = b.num_entries();
  Var vals = add(scatter_add_rows(gather_rows(zc, b.entry_edges), b.entry_position, M),
                 Var(b.self_indicator));
  Var deg = spmm(b.rows, b.cols, vals, Var(Tensor(b.num_nodes, 1, 1.0)), b.num_nodes);
  Var dinv = pow(deg, -0.5);
  Var w = mul(mul(gather_rows(dinv, b.rows), vals), gather_rows(dinv, b.cols));
  return {b.rows, b.cols, w, b.num_nodes};
}

/// One convolution: P (H W) + b.
inline Var gcn_layer(const Propagation& p, const Var& h, const Var& w, const Var& bias) {
  return add_row(spmm(p.rows, p.cols, p.weights, matmul(h, w), p.num_nodes), bias);
}

/// Node embeddings after all convolution layers of `params` (head excluded).
inline Var gcn_encode(const Propagation& p, const Var& x, std::span<const Var> params) {
  if (params.size() < 4 || params.size() % 2 != 0) throw ContractError("gcn_encode: bad params");
  const std::size_t layers = params.size() / 2 - 1;
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = gcn_layer(p, h, params[2 * l], params[2 * l + 1]);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

struct GnnOutput {
  Var node_embeddings;   // N x width
  Var graph_embeddings;  // B x width
  Var predictions;       // B x 1; logits for classification
};

inline GnnOutput gnn_forward(const GraphBatch& b, const Propagation& p, std::span<const Var> theta) {
  if (theta.empty() || theta[0].rows() != b.features.cols()) {
    throw ShapeError("gnn_forward: feature width " + std::to_string(b.features.cols()) +
                     " does not match the first layer");
  }
  GnnOutput out;
  out.node_embeddings = gcn_encode(p, Var(b.features), theta);
  out.graph_embeddings = segment_max(out.node_embeddings, b.node_offsets);
  const std::size_t n = theta.size();
  out.predictions = add_row(matmul(out.graph_embeddings, theta[n - 2]), theta[n - 1]);
  return out;
}

inline GnnOutput gnn_forward(const GraphBatch& b, const Var& z, std::span<const Var> theta) {
  return gnn_forward(b, make_propagation(b, z), theta);
}

/// Single graph with a plain per-edge influence vector.
inline GnnOutput forward(const Graph& g, const std::vector<double>& z, const ModelParams& theta) {
  if (z.size() != g.num_edges()) {
    throw ContractError("forward: " + std::to_string(z.size()) + " influences for " +
                        std::to_string(g.num_edges()) + " edges");
  }
  const GraphBatch b = GraphBatch::of(g);
  const auto vars = theta.constants();
  return gnn_forward(b, Var(Tensor(z.size(), 1, z)), vars);
}

// ---------------------------------------------------------------------------
// Dense reference

/// A_Z as a dense symmetric matrix with unit diagonal.
inline Tensor build_weighted_adjacency(const Graph& g, std::span<const double> z) {
  if (z.size() != g.num_edges()) {
    throw ContractError("build_weighted_adjacency: " + std::to_string(z.size()) +
                        " influences for " + std::to_string(g.num_edges()) + " edges");
  }
  Tensor a(g.num_nodes, g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i) a(i, i) = 1.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    a(g.edges[e].u, g.edges[e].v) = z[e];
    a(g.edges[e].v, g.edges[e].u) = z[e];
  }
  return a;
}

struct ReferenceOutput {
  Tensor node_embeddings;
  Tensor graph_embedding;
  double prediction = 0.0;
};

/// Dense, tape-free forward on one graph from its adjacency matrix (with
/// diagonal). Shares no code with the batched path beyond matmul.
inline ReferenceOutput reference_forward(const Tensor& adjacency, const Tensor& x,
                                         const ModelParams& theta) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n || x.rows() != n) throw ShapeError("reference_forward: bad shapes");
  if (n == 0) throw DegenerateInputError("reference_forward: empty graph");
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += adjacency(i, j);
    dinv[i] = 1.0 / std::sqrt(deg);
  }
  Tensor norm(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) norm(i, j) = dinv[i] * adjacency(i, j) * dinv[j];
  }
  const std::size_t layers = theta.size() / 2 - 1;
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor next = kernels::matmul(norm, kernels::matmul(h, theta.tensors[2 * l]));
    const Tensor& bias = theta.tensors[2 * l + 1];
    for (std::size_t i = 0; i < next.rows(); ++i) {
      for (std::size_t j = 0; j < next.cols(); ++j) {
        next(i, j) += bias(0, j);
        if (l + 1 < layers && !(next(i, j) > 0.0)) next(i, j) = 0.0;
      }
    }
    h = std::move(next);
  }
  ReferenceOutput out;
  out.graph_embedding = Tensor(1, h.cols());
  for (std::size_t j = 0; j < h.cols(); ++j) {
    double m = h(0, j);
    for (std::size_t i = 1; i < n; ++i) m = h(i, j) > m ? h(i, j) : m;
    out.graph_embedding(0, j) = m;
  }
  const Tensor pred = kernels::matmul(out.graph_embedding, theta.tensors[2 * layers]);
  out.prediction = pred(0, 0) + theta.tensors[2 * layers + 1](0, 0);
  out.node_embeddings = std::move(h);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

/// Text format: a header line, then per tensor "name rows cols" followed by
/// one line of shortest round-trip decimal values.
inline void save_params(const ModelParams& p, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "antehoc-params 1 " << p.size() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& t = p.tensors[i];
    out << p.names[i] << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t k = 0; k < t.size(); ++k) {
      auto r = std::to_chars(buf, buf + sizeof buf, t[k]);
      if (k) out << ' ';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

inline ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != "antehoc-params" || version != 1) {
    throw ParseError(path.string() + ": not a parameter file", 1);
  }
  ModelParams p;
  std::size_t line = 1;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t r = 0, c = 0;
    ++line;
    if (!(in >> name >> r >> c)) throw ParseError(path.string() + ": bad tensor header", line);
    ++line;
    std::vector<double> data(r * c);
    for (double& v : data) {
      std::string tok;
      if (!(in >> tok)) throw ParseError(path.string() + ": truncated tensor " + name, line);
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ParseError(path.string() + ": bad number '" + tok + "'", line);
      }
    }
    p.names.push_back(name);
    p.tensors.emplace_back(r, c, std::move(data));
  }
  return p;
}

}  // namespace antehoc
