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

// Reverse-mode automatic differentiation over dense matrices.
//
// A `Tape` records every operation whose result depends on a differentiable
// leaf. Constants never touch the tape. Every vector-Jacobian product is
// itself written in terms of the recorded operations, so gradients computed
// with `GradMode::kCreateGraph` are ordinary tape nodes and can be
// differentiated again. This is what lets an outer loss see through an
// unrolled inner optimisation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "antehoc/errors.hpp"
#include "antehoc/tensor.hpp"

namespace antehoc {

class Tape;

/// Handle to a value that is either a constant or a node on a `Tape`.
/// Copies are cheap; the underlying tensor is shared and immutable.
class Var {
 public:
  Var() = default;
  /// Constant (never differentiated).
  explicit Var(Tensor t) : value_(std::make_shared<const Tensor>(std::move(t))) {}

  const Tensor& value() const { return *value_; }
  std::shared_ptr<const Tensor> shared_value() const { return value_; }
  Shape shape() const { return value_->shape(); }
  std::size_t rows() const { return value_->rows(); }
  std::size_t cols() const { return value_->cols(); }
  bool defined() const { return value_ != nullptr; }

  /// True when this value is a tape node, i.e. depends on a leaf.
  bool requires_grad() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::int64_t id() const { return id_; }

  /// Same value, cut off from the tape.
  Var detach() const {
    Var v;
    v.value_ = value_;
    return v;
  }

 private:
  friend class Tape;
  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  std::int64_t id_ = -1;
};

enum class GradMode {
  kNoGraph,      // returned gradients are constants
  kCreateGraph,  // returned gradients are tape nodes (differentiable)
};

/// Vector-Jacobian product of one node. Receives the upstream gradient, the
/// node output, the inputs and a mask of which inputs need a gradient, and
/// returns one gradient per input (undefined `Var` where none is needed).
using BackwardFn = std::function<std::vector<Var>(
    const Var& grad, const Var& out, std::span<const Var> inputs, std::span<const bool> need)>;
using ForwardFn = std::function<Tensor(std::span<const Tensor* const>)>;

/// Leaf id to gradient.
using GradientMap = std::map<std::int64_t, Tensor>;

/// The computation record. Nodes are appended in execution order, so every
/// input id is smaller than the id of its consumer.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable leaf.
  Var leaf(Tensor value) {
    Node n;
    n.op = "leaf";
    n.value = std::make_shared<const Tensor>(std::move(value));
    return push(std::move(n));
  }

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::int64_t id) const { return nodes_.at(id).op; }
  const std::vector<Var>& inputs_of(std::int64_t id) const { return nodes_.at(id).inputs; }
  const Tensor& value_of(std::int64_t id) const { return *nodes_.at(id).value; }
  bool is_leaf(std::int64_t id) const { return nodes_.at(id).op == "leaf"; }

  /// While false, operations produce constants instead of nodes.
  bool recording() const { return recording_; }

  /// Re-evaluates every non-leaf node from its recorded inputs and reports
  /// whether all outputs are reproduced bit for bit.
  bool replay_matches() const {
    for (const Node& n : nodes_) {
      if (!n.forward) continue;
      std::vector<const Tensor*> in;
      in.reserve(n.inputs.size());
      for (const Var& v : n.inputs) in.push_back(&v.value());
      if (!(n.forward(in) == *n.value)) return false;
    }
    return true;
  }

  /// Records an operation. Returns a constant when no input is a recording
  /// tape node.
  static Var apply(std::string_view op, std::vector<Var> inputs, ForwardFn forward,
                   BackwardFn backward) {
    std::vector<const Tensor*> in;
    in.reserve(inputs.size());
    Tape* tape = nullptr;
    for (const Var& v : inputs) {
      in.push_back(&v.value());
      if (v.tape_ != nullptr && v.tape_->recording_) tape = v.tape_;
    }
    Tensor value = forward(in);
    if (tape == nullptr) return Var(std::move(value));
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::make_shared<const Tensor>(std::move(value));
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    return tape->push(std::move(n));
  }

  /// Gradients of the scalar `loss` with respect to `wrt`. Entries of `wrt`
  /// that the loss does not depend on receive zeros of the matching shape.
  static std::vector<Var> grad(const Var& loss, std::span<const Var> wrt,
                               GradMode mode = GradMode::kNoGraph) {
    if (loss.shape() != Shape{1, 1}) {
      throw ContractError("grad: loss must be a 1x1 scalar, got " + to_string(loss.shape()));
    }
    std::vector<Var> out(wrt.size());
    Tape* tape = loss.tape_;
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    for (const Var& w : wrt) {
      if (w.tape_ != nullptr && w.tape_ == tape && w.id_ <= loss.id_) lo = std::min(lo, w.id_);
    }
    if (tape != nullptr && lo != std::numeric_limits<std::int64_t>::max()) {
      tape->backprop(loss, wrt, lo, mode, out);
    }
    for (std::size_t i = 0; i < wrt.size(); ++i) {
      if (!out[i].defined()) out[i] = Var(Tensor(wrt[i].rows(), wrt[i].cols()));
    }
    return out;
  }

  /// Gradient of `loss` with respect to every leaf of this tape.
  GradientMap backward(const Var& loss) {
    if (loss.shape() != Shape{1, 1}) {
      throw ContractError("backward: loss must be a 1x1 scalar, got " + to_string(loss.shape()));
    }
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].op == "leaf") leaves.push_back(var_of(static_cast<std::int64_t>(i)));
    }
    GradientMap result;
    const auto g = grad(loss, leaves);
    for (std::size_t i = 0; i < leaves.size(); ++i) result.emplace(leaves[i].id_, g[i].value());
    return result;
  }

 private:
  struct Node {
    std::string_view op;
    std::vector<Var> inputs;
    std::shared_ptr<const Tensor> value;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var push(Node n) {
    Var v;
    v.value_ = n.value;
    v.tape_ = this;
    v.id_ = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    return v;
  }

  Var var_of(std::int64_t id) const {
    Var v;
    v.value_ = nodes_[id].value;
    v.tape_ = const_cast<Tape*>(this);
    v.id_ = id;
    return v;
  }

  void backprop(const Var& loss, std::span<const Var> wrt, std::int64_t lo, GradMode mode,
                std::vector<Var>& out);

  std::deque<Node> nodes_;
  bool recording_ = true;

  friend class NoGradGuard;
};

/// Suspends recording on a tape for the guard's lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), prev_(tape.recording_) { tape.recording_ = false; }
  ~NoGradGuard() { tape_.recording_ = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool prev_;
};

// ---------------------------------------------------------------------------
// Operations

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var abs(const Var& a);
Var pow(const Var& a, double p);
Var maximum(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false);
Var sum(const Var& a);
Var mean(const Var& a);
Var expand(const Var& s, std::size_t rows, std::size_t cols);
Var sum_rows(const Var& a);
Var broadcast_rows(const Var& row, std::size_t rows);
Var add_row(const Var& a, const Var& row);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var pad_cols(const Var& a, std::size_t begin, std::size_t total);

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;
inline IndexList make_index(std::vector<std::size_t> v) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(v));
}

Var gather_rows(const Var& a, IndexList idx);
Var scatter_add_rows(const Var& a, IndexList idx, std::size_t rows);
Var gather_flat(const Var& a, IndexList idx, std::size_t rows, std::size_t cols);
Var scatter_add_flat(const Var& a, IndexList idx, std::size_t rows, std::size_t cols);
Var spmm(IndexList rows, IndexList cols, const Var& vals, const Var& x, std::size_t out_rows);
Var sddmm(IndexList rows, IndexList cols, const Var& a, const Var& b);
Var segment_max(const Var& h, std::span<const std::size_t> offsets);
Var row_max_pool(const Var& h);

// Losses (mean-reduced task losses, summed penalties).
Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets);
Var mse(const Var& pred, const Tensor& targets);
Var l1_norm(const Var& t);
Var l2_norm_sq(const Var& t);

// ---------------------------------------------------------------------------
// Implementation

inline void Tape::backprop(const Var& loss, std::span<const Var> wrt, std::int64_t lo,
                           GradMode mode, std::vector<Var>& out) {
  const std::int64_t hi = loss.id_;
  const auto span_len = static_cast<std::size_t>(hi - lo + 1);
  // relevant[i]: node lo+i lies on a path from some target to the loss.
  std::vector<char> relevant(span_len, 0);
  for (const Var& w : wrt) {
    if (w.tape_ == this && w.id_ >= lo && w.id_ <= hi) relevant[w.id_ - lo] = 1;
  }
  for (std::int64_t i = lo; i <= hi; ++i) {
    if (relevant[i - lo]) continue;
    for (const Var& in : nodes_[i].inputs) {
      if (in.tape_ == this && in.id_ >= lo && relevant[in.id_ - lo]) {
        relevant[i - lo] = 1;
        break;
      }
    }
  }
  if (!relevant[hi - lo]) return;

  std::vector<char> is_target(span_len, 0);
  for (const Var& w : wrt) {
    if (w.tape_ == this && w.id_ >= lo && w.id_ <= hi) is_target[w.id_ - lo] = 1;
  }

  std::optional<NoGradGuard> guard;
  if (mode == GradMode::kNoGraph) guard.emplace(*this);

  std::vector<Var> grads(span_len);
  grads[hi - lo] = Var(Tensor::scalar(1.0));
  for (std::int64_t i = hi; i >= lo; --i) {
    const std::size_t k = static_cast<std::size_t>(i - lo);
    if (!grads[k].defined() || !relevant[k]) continue;
    // Nodes are stable in a deque; take a copy of the pieces we need because
    // the backward call may append new nodes.
    const std::vector<Var> inputs = nodes_[i].inputs;
    const BackwardFn backward = nodes_[i].backward;
    if (!backward) {
      if (!is_target[k]) grads[k] = Var();
      continue;
    }
    std::vector<char> need_c(inputs.size(), 0);
    bool any = false;
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const Var& in = inputs[j];
      if (in.tape_ == this && in.id_ >= lo && relevant[in.id_ - lo]) {
        need_c[j] = 1;
        any = true;
      }
    }
    if (any) {
      std::unique_ptr<bool[]> need(new bool[inputs.size()]);
      for (std::size_t j = 0; j < inputs.size(); ++j) need[j] = need_c[j] != 0;
      const auto gin = backward(grads[k], var_of(i), inputs,
                                std::span<const bool>(need.get(), inputs.size()));
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (!need_c[j] || !gin[j].defined()) continue;
        const std::size_t t = static_cast<std::size_t>(inputs[j].id_ - lo);
        grads[t] = grads[t].defined() ? add(grads[t], gin[j]) : gin[j];
      }
    }
    if (!is_target[k]) grads[k] = Var();
  }
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const Var& w = wrt[i];
    if (w.tape_ == this && w.id_ >= lo && w.id_ <= hi) out[i] = grads[w.id_ - lo];
  }
}

namespace detail {

inline const Tensor& in0(std::span<const Tensor* const> in) { return *in[0]; }
inline const Tensor& in1(std::span<const Tensor* const> in) { return *in[1]; }

inline std::vector<Var> none(std::size_t n) { return std::vector<Var>(n); }

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  return Tape::apply(
      "add", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "add",
                            [](double x, double y) { return x + y; });
      },
      [](const Var& g, const Var&, auto, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = g;
        if (need[1]) r[1] = g;
        return r;
      });
}

inline Var sub(const Var& a, const Var& b) {
  return Tape::apply(
      "sub", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "sub",
                            [](double x, double y) { return x - y; });
      },
      [](const Var& g, const Var&, auto, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = g;
        if (need[1]) r[1] = neg(g);
        return r;
      });
}

inline Var mul(const Var& a, const Var& b) {
  return Tape::apply(
      "mul", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "mul",
                            [](double x, double y) { return x * y; });
      },
      [](const Var& g, const Var&, std::span<const Var> in, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = mul(g, in[1]);
        if (need[1]) r[1] = mul(g, in[0]);
        return r;
      });
}

inline Var div(const Var& a, const Var& b) {
  return Tape::apply(
      "div", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "div",
                            [](double x, double y) { return x / y; });
      },
      [](const Var& g, const Var& out, std::span<const Var> in, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = div(g, in[1]);
        if (need[1]) r[1] = neg(div(mul(g, out), in[1]));
        return r;
      });
}

inline Var scale(const Var& a, double c) {
  return Tape::apply(
      "scale", {a},
      [c](auto in) { return kernels::map(detail::in0(in), [c](double x) { return c * x; }); },
      [c](const Var& g, const Var&, auto, auto) { return std::vector<Var>{scale(g, c)}; });
}

inline Var add_scalar(const Var& a, double c) {
  return Tape::apply(
      "add_scalar", {a},
      [c](auto in) { return kernels::map(detail::in0(in), [c](double x) { return x + c; }); },
      [](const Var& g, const Var&, auto, auto) { return std::vector<Var>{g}; });
}

inline Var neg(const Var& a) {
  return Tape::apply(
      "neg", {a}, [](auto in) { return kernels::map(detail::in0(in), [](double x) { return -x; }); },
      [](const Var& g, const Var&, auto, auto) { return std::vector<Var>{neg(g)}; });
}

inline Var relu(const Var& a) {
  return Tape::apply(
      "relu", {a},
      [](auto in) {
        return kernels::map(detail::in0(in), [](double x) { return x > 0.0 ? x : 0.0; });
      },
      [](const Var& g, const Var&, std::span<const Var> in, auto) {
        Var mask(kernels::map(in[0].value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
        return std::vector<Var>{mul(g, mask)};
      });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  return Tape::apply(
      "sigmoid", {a}, [](auto in) { return kernels::map(detail::in0(in), sigmoid_scalar); },
      [](const Var& g, const Var& out, auto, auto) {
        return std::vector<Var>{mul(g, mul(out, add_scalar(neg(out), 1.0)))};
      });
}

inline Var softplus(const Var& a) {
  return Tape::apply(
      "softplus", {a},
      [](auto in) {
        return kernels::map(detail::in0(in), [](double x) {
          return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
        });
      },
      [](const Var& g, const Var&, std::span<const Var> in, auto) {
        return std::vector<Var>{mul(g, sigmoid(in[0]))};
      });
}

inline Var abs(const Var& a) {
  return Tape::apply(
      "abs", {a},
      [](auto in) { return kernels::map(detail::in0(in), [](double x) { return std::abs(x); }); },
      [](const Var& g, const Var&, std::span<const Var> in, auto) {
        Var sign(kernels::map(in[0].value(),
                              [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }));
        return std::vector<Var>{mul(g, sign)};
      });
}

inline Var pow(const Var& a, double p) {
  return Tape::apply(
      "pow", {a},
      [p](auto in) {
        if (p == -0.5) {
          return kernels::map(detail::in0(in), [](double x) { return 1.0 / std::sqrt(x); });
        }
        if (p == 0.5) return kernels::map(detail::in0(in), [](double x) { return std::sqrt(x); });
        return kernels::map(detail::in0(in), [p](double x) { return std::pow(x, p); });
      },
      [p](const Var& g, const Var&, std::span<const Var> in, auto) {
        return std::vector<Var>{mul(g, scale(pow(in[0], p - 1.0), p))};
      });
}

inline Var maximum(const Var& a, const Var& b) {
  return Tape::apply(
      "maximum", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "maximum",
                            [](double x, double y) { return x >= y ? x : y; });
      },
      [](const Var& g, const Var&, std::span<const Var> in, auto need) {
        // Ties route the gradient to the first operand.
        Tensor m = kernels::zip(in[0].value(), in[1].value(), "maximum",
                                [](double x, double y) { return x >= y ? 1.0 : 0.0; });
        auto r = detail::none(2);
        if (need[0]) r[0] = mul(g, Var(m));
        if (need[1]) r[1] = mul(g, Var(kernels::map(m, [](double v) { return 1.0 - v; })));
        return r;
      });
}

inline Var minimum(const Var& a, const Var& b) {
  return Tape::apply(
      "minimum", {a, b},
      [](auto in) {
        return kernels::zip(detail::in0(in), detail::in1(in), "minimum",
                            [](double x, double y) { return x <= y ? x : y; });
      },
      [](const Var& g, const Var&, std::span<const Var> in, auto need) {
        Tensor m = kernels::zip(in[0].value(), in[1].value(), "minimum",
                                [](double x, double y) { return x <= y ? 1.0 : 0.0; });
        auto r = detail::none(2);
        if (need[0]) r[0] = mul(g, Var(m));
        if (need[1]) r[1] = mul(g, Var(kernels::map(m, [](double v) { return 1.0 - v; })));
        return r;
      });
}

inline Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  return Tape::apply(
      "matmul", {a, b},
      [ta, tb](auto in) { return kernels::matmul(detail::in0(in), detail::in1(in), ta, tb); },
      [ta, tb](const Var& g, const Var&, std::span<const Var> in, auto need) {
        const Var& A = in[0];
        const Var& B = in[1];
        auto r = detail::none(2);
        if (!ta && !tb) {
          if (need[0]) r[0] = matmul(g, B, false, true);
          if (need[1]) r[1] = matmul(A, g, true, false);
        } else if (!ta && tb) {
          if (need[0]) r[0] = matmul(g, B, false, false);
          if (need[1]) r[1] = matmul(g, A, true, false);
        } else if (ta && !tb) {
          if (need[0]) r[0] = matmul(B, g, false, true);
          if (need[1]) r[1] = matmul(A, g, false, false);
        } else {
          if (need[0]) r[0] = matmul(B, g, true, true);
          if (need[1]) r[1] = matmul(g, A, true, true);
        }
        return r;
      });
}

inline Var sum(const Var& a) {
  const std::size_t r = a.rows();
  const std::size_t c = a.cols();
  return Tape::apply(
      "sum", {a},
      [](auto in) {
        double s = 0.0;
        for (double v : detail::in0(in).data()) s += v;
        return Tensor::scalar(s);
      },
      [r, c](const Var& g, const Var&, auto, auto) { return std::vector<Var>{expand(g, r, c)}; });
}

inline Var mean(const Var& a) {
  if (a.value().size() == 0) throw DegenerateInputError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

inline Var expand(const Var& s, std::size_t rows, std::size_t cols) {
  if (s.shape() != Shape{1, 1}) throw ShapeError("expand: expects a 1x1 input, got " + to_string(s.shape()));
  return Tape::apply(
      "expand", {s},
      [rows, cols](auto in) { return Tensor(rows, cols, detail::in0(in)[0]); },
      [](const Var& g, const Var&, auto, auto) { return std::vector<Var>{sum(g)}; });
}

inline Var sum_rows(const Var& a) {
  const std::size_t r = a.rows();
  return Tape::apply(
      "sum_rows", {a},
      [](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(1, x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x(i, j);
        return out;
      },
      [r](const Var& g, const Var&, auto, auto) { return std::vector<Var>{broadcast_rows(g, r)}; });
}

inline Var broadcast_rows(const Var& row, std::size_t rows) {
  if (row.rows() != 1) throw ShapeError("broadcast_rows: expects a row vector, got " + to_string(row.shape()));
  return Tape::apply(
      "broadcast_rows", {row},
      [rows](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(rows, x.cols());
        for (std::size_t i = 0; i < rows; ++i)
          std::copy(x.data().begin(), x.data().end(), out.data().begin() + i * x.cols());
        return out;
      },
      [](const Var& g, const Var&, auto, auto) { return std::vector<Var>{sum_rows(g)}; });
}

inline Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: cannot add " + to_string(row.shape()) + " to each row of " +
                     to_string(a.shape()));
  }
  return Tape::apply(
      "add_row", {a, row},
      [](auto in) {
        const Tensor& x = detail::in0(in);
        const Tensor& b = detail::in1(in);
        Tensor out = x;
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += b[j];
        return out;
      },
      [](const Var& g, const Var&, auto, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = g;
        if (need[1]) r[1] = sum_rows(g);
        return r;
      });
}

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const std::size_t p = a.cols();
  const std::size_t q = b.cols();
  return Tape::apply(
      "concat_cols", {a, b},
      [](auto in) {
        const Tensor& x = detail::in0(in);
        const Tensor& y = detail::in1(in);
        Tensor out(x.rows(), x.cols() + y.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) out(i, x.cols() + j) = y(i, j);
        }
        return out;
      },
      [p, q](const Var& g, const Var&, auto, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = slice_cols(g, 0, p);
        if (need[1]) r[1] = slice_cols(g, p, p + q);
        return r;
      });
}

inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  const std::size_t total = a.cols();
  return Tape::apply(
      "slice_cols", {a},
      [begin, end](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(x.rows(), end - begin);
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
        return out;
      },
      [begin, total](const Var& g, const Var&, auto, auto) {
        return std::vector<Var>{pad_cols(g, begin, total)};
      });
}

inline Var pad_cols(const Var& a, std::size_t begin, std::size_t total) {
  if (begin + a.cols() > total) throw ShapeError("pad_cols: target width too small");
  const std::size_t w = a.cols();
  return Tape::apply(
      "pad_cols", {a},
      [begin, total](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(x.rows(), total);
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) out(i, begin + j) = x(i, j);
        return out;
      },
      [begin, w](const Var& g, const Var&, auto, auto) {
        return std::vector<Var>{slice_cols(g, begin, begin + w)};
      });
}

inline Var gather_rows(const Var& a, IndexList idx) {
  const std::size_t n = a.rows();
  for (std::size_t i : *idx) {
    if (i >= n) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range");
  }
  return Tape::apply(
      "gather_rows", {a},
      [idx](auto in) {
        const Tensor& x = detail::in0(in);
        const std::size_t c = x.cols();
        Tensor out(idx->size(), c);
        for (std::size_t k = 0; k < idx->size(); ++k) {
          const auto src = x.data().subspan((*idx)[k] * c, c);
          std::copy(src.begin(), src.end(), out.data().begin() + k * c);
        }
        return out;
      },
      [idx, n](const Var& g, const Var&, auto, auto) {
        return std::vector<Var>{scatter_add_rows(g, idx, n)};
      });
}

inline Var scatter_add_rows(const Var& a, IndexList idx, std::size_t rows) {
  if (a.rows() != idx->size()) throw ShapeError("scatter_add_rows: index length mismatch");
  return Tape::apply(
      "scatter_add_rows", {a},
      [idx, rows](auto in) {
        const Tensor& x = detail::in0(in);
        const std::size_t c = x.cols();
        Tensor out(rows, c);
        for (std::size_t k = 0; k < idx->size(); ++k) {
          double* dst = out.data().data() + (*idx)[k] * c;
          const double* src = x.data().data() + k * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        return out;
      },
      [idx](const Var& g, const Var&, auto, auto) { return std::vector<Var>{gather_rows(g, idx)}; });
}

inline Var gather_flat(const Var& a, IndexList idx, std::size_t rows, std::size_t cols) {
  if (idx->size() != rows * cols) throw ShapeError("gather_flat: index length mismatch");
  const std::size_t ar = a.rows();
  const std::size_t ac = a.cols();
  return Tape::apply(
      "gather_flat", {a},
      [idx, rows, cols](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(rows, cols);
        for (std::size_t k = 0; k < idx->size(); ++k) out[k] = x[(*idx)[k]];
        return out;
      },
      [idx, ar, ac](const Var& g, const Var&, auto, auto) {
        return std::vector<Var>{scatter_add_flat(g, idx, ar, ac)};
      });
}

inline Var scatter_add_flat(const Var& a, IndexList idx, std::size_t rows, std::size_t cols) {
  if (idx->size() != a.value().size()) throw ShapeError("scatter_add_flat: index length mismatch");
  const std::size_t ar = a.rows();
  const std::size_t ac = a.cols();
  return Tape::apply(
      "scatter_add_flat", {a},
      [idx, rows, cols](auto in) {
        const Tensor& x = detail::in0(in);
        Tensor out(rows, cols);
        for (std::size_t k = 0; k < idx->size(); ++k) out[(*idx)[k]] += x[k];
        return out;
      },
      [idx, ar, ac](const Var& g, const Var&, auto, auto) {
        return std::vector<Var>{gather_flat(g, idx, ar, ac)};
      });
}

/// Sparse-times-dense product: out[rows[e]] += vals[e] * x[cols[e]].
/// Entries are accumulated in list order.
inline Var spmm(IndexList rows, IndexList cols, const Var& vals, const Var& x, std::size_t out_rows) {
  if (rows->size() != cols->size() || vals.rows() != rows->size() || vals.cols() != 1) {
    throw ShapeError("spmm: entry list and value column disagree");
  }
  const std::size_t in_rows = x.rows();
  return Tape::apply(
      "spmm", {vals, x},
      [rows, cols, out_rows](auto in) {
        const Tensor& v = detail::in0(in);
        const Tensor& x = detail::in1(in);
        const std::size_t c = x.cols();
        Tensor out(out_rows, c);
        double* o = out.data().data();
        const double* xs = x.data().data();
        for (std::size_t e = 0; e < rows->size(); ++e) {
          const double w = v[e];
          double* dst = o + (*rows)[e] * c;
          const double* src = xs + (*cols)[e] * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
        }
        return out;
      },
      [rows, cols, in_rows](const Var& g, const Var&, std::span<const Var> in, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = sddmm(rows, cols, g, in[1]);
        if (need[1]) r[1] = spmm(cols, rows, in[0], g, in_rows);
        return r;
      });
}

/// Per-entry dot products: out[e] = <a[rows[e]], b[cols[e]]>.
inline Var sddmm(IndexList rows, IndexList cols, const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("sddmm: operand widths differ");
  const std::size_t ar = a.rows();
  const std::size_t br = b.rows();
  return Tape::apply(
      "sddmm", {a, b},
      [rows, cols](auto in) {
        const Tensor& x = detail::in0(in);
        const Tensor& y = detail::in1(in);
        const std::size_t c = x.cols();
        Tensor out(rows->size(), 1);
        for (std::size_t e = 0; e < rows->size(); ++e) {
          const double* p = x.data().data() + (*rows)[e] * c;
          const double* q = y.data().data() + (*cols)[e] * c;
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += p[j] * q[j];
          out[e] = acc;
        }
        return out;
      },
      [rows, cols, ar, br](const Var& g, const Var&, std::span<const Var> in, auto need) {
        auto r = detail::none(2);
        if (need[0]) r[0] = spmm(rows, cols, g, in[1], ar);
        if (need[1]) r[1] = spmm(cols, rows, g, in[0], br);
        return r;
      });
}

/// Column-wise maximum over each contiguous row segment [offsets[s],
/// offsets[s+1]). Ties resolve to the lowest row index, which receives the
/// full gradient.
inline Var segment_max(const Var& h, std::span<const std::size_t> offsets) {
  if (offsets.size() < 2) throw DegenerateInputError("segment_max: no segments");
  const Tensor& x = h.value();
  const std::size_t d = x.cols();
  const std::size_t segments = offsets.size() - 1;
  if (offsets.back() != x.rows()) throw ShapeError("segment_max: offsets do not cover the rows");
  std::vector<std::size_t> arg(segments * d);
  for (std::size_t s = 0; s < segments; ++s) {
    if (offsets[s + 1] <= offsets[s]) throw DegenerateInputError("segment_max: empty segment");
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = offsets[s];
      for (std::size_t i = offsets[s] + 1; i < offsets[s + 1]; ++i) {
        if (x(i, j) > x(best, j)) best = i;
      }
      arg[s * d + j] = best * d + j;
    }
  }
  return gather_flat(h, make_index(std::move(arg)), segments, d);
}

inline Var row_max_pool(const Var& h) {
  if (h.rows() == 0) throw DegenerateInputError("row_max_pool: input has no rows");
  const std::size_t offsets[2] = {0, h.rows()};
  return segment_max(h, offsets);
}

inline Var binary_cross_entropy_with_logits(const Var& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("binary_cross_entropy_with_logits: shape mismatch " +
                     to_string(logits.shape()) + " vs " + to_string(targets.shape()));
  }
  for (double t : targets.data()) {
    if (t != 0.0 && t != 1.0) throw DomainError("binary_cross_entropy_with_logits: target " +
                                                std::to_string(t) + " is not in {0,1}");
  }
  // softplus(x) - t*x == -[t log s(x) + (1-t) log(1-s(x))]
  return mean(sub(softplus(logits), mul(Var(targets), logits)));
}

inline Var mse(const Var& pred, const Tensor& targets) {
  if (pred.shape() != targets.shape()) {
    throw ShapeError("mse: shape mismatch " + to_string(pred.shape()) + " vs " +
                     to_string(targets.shape()));
  }
  const Var diff = sub(pred, Var(targets));
  return mean(mul(diff, diff));
}

inline Var l1_norm(const Var& t) { return sum(abs(t)); }

inline Var l2_norm_sq(const Var& t) { return sum(mul(t, t)); }

}  // namespace antehoc
