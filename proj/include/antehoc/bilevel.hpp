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

// Joint training of the explainer (outer, Phi) and the predictor (inner,
// theta). The inner loop is unrolled on a tape so the support loss can be
// differentiated through every inner update back to Phi.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "antehoc/autodiff.hpp"
#include "antehoc/errors.hpp"
#include "antehoc/explainer.hpp"
#include "antehoc/gnn.hpp"
#include "antehoc/graph.hpp"
#include "antehoc/metrics.hpp"
#include "antehoc/optim.hpp"

namespace antehoc {

enum class Method { kRage, kSingle, kKeep };

inline const char* method_tag(Method m) {
  switch (m) {
    case Method::kRage: return "rage";
    case Method::kSingle: return "rage-single";
    case Method::kKeep: return "rage-keep";
  }
  return "?";
}

enum class InnerOptimizer { kSgd, kAdam };

/// How the sparsity penalty on Z is reduced over the support batch.
enum class L1Reduction {
  kSum,       // lambda * sum z
  kPerGraph,  // lambda * sum z / number of graphs
  kPerEdge,   // lambda * mean z
};

struct TrainConfig {
  std::size_t inner_steps = 20;   // T
  std::size_t outer_steps = 100;  // kappa
  double inner_lr = 0.001;
  double outer_lr = 0.001;
  double inner_l2 = 0.001;
  double outer_l1 = 0.001;
  double outer_l2 = 0.001;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t width = 20;
  InnerOptimizer inner_optimizer = InnerOptimizer::kSgd;
  L1Reduction l1_reduction = L1Reduction::kSum;

  void validate() const {
    if (inner_steps < 1) throw ParameterError("inner_steps must be >= 1");
    if (outer_steps < 1) throw ParameterError("outer_steps must be >= 1");
    if (!(inner_lr > 0.0)) throw ParameterError("inner_lr must be > 0");
    if (!(outer_lr > 0.0)) throw ParameterError("outer_lr must be > 0");
    if (!(inner_l2 >= 0.0 && outer_l1 >= 0.0 && outer_l2 >= 0.0)) {
      throw ParameterError("regularisation weights must be >= 0");
    }
    if (patience < 1) throw ParameterError("patience must be >= 1");
    if (width < 1) throw ParameterError("width must be >= 1");
  }
};

struct LogRow {
  std::size_t outer_step = 0;
  double train_loss = 0.0;
  double support_loss = 0.0;
  double val_metric = 0.0;
  double wall_seconds = 0.0;
};

struct TrainerOutput {
  Method method = Method::kRage;
  ModelParams phi;    // best-validation explainer
  ModelParams theta;  // predictor paired with it
  std::vector<LogRow> log;
  std::size_t best_step = 0;
  std::size_t stop_step = 0;  // last outer step executed
};

// ---------------------------------------------------------------------------
// Losses

inline Var task_loss(const Var& predictions, const Tensor& labels, TaskKind task) {
  return task == TaskKind::kClassification ? binary_cross_entropy_with_logits(predictions, labels)
                                           : mse(predictions, labels);
}

/// Task loss plus lambda * ||theta||^2.
inline Var inner_loss(const Var& predictions, const Tensor& labels, TaskKind task,
                      std::span<const Var> theta, double lambda_l2) {
  Var loss = task_loss(predictions, labels, task);
  if (lambda_l2 != 0.0) loss = add(loss, scale(l2_penalty(theta), lambda_l2));
  return loss;
}

inline Var l1_term(const Var& z, std::size_t num_graphs, L1Reduction r) {
  Var s = l1_norm(z);
  switch (r) {
    case L1Reduction::kSum: return s;
    case L1Reduction::kPerGraph: return scale(s, 1.0 / static_cast<double>(std::max<std::size_t>(num_graphs, 1)));
    case L1Reduction::kPerEdge: return scale(s, 1.0 / static_cast<double>(std::max<std::size_t>(z.rows(), 1)));
  }
  return s;
}

/// Support task loss plus lambda_1 * L1(Z) plus lambda_2 * ||Phi||^2.
inline Var outer_loss(const Var& predictions, const Tensor& labels, TaskKind task, const Var& z,
                      std::size_t num_graphs, std::span<const Var> phi, const TrainConfig& c) {
  Var loss = task_loss(predictions, labels, task);
  if (c.outer_l1 != 0.0) loss = add(loss, scale(l1_term(z, num_graphs, c.l1_reduction), c.outer_l1));
  if (c.outer_l2 != 0.0) loss = add(loss, scale(l2_penalty(phi), c.outer_l2));
  return loss;
}

namespace detail {

inline void require_finite(const Var& loss, const char* what, std::size_t tau, std::size_t t) {
  if (!std::isfinite(loss.value().item())) {
    throw DivergenceError(std::string(what) + " is not finite", static_cast<int>(tau),
                          static_cast<int>(t));
  }
}

/// Runs `steps` inner updates of theta on the batch. Differentiable when the
/// inputs are on a recording tape.
inline std::vector<Var> inner_loop(const GraphBatch& batch, const Propagation& prop,
                                   std::vector<Var> theta, TaskKind task, const TrainConfig& c,
                                   double lr, std::size_t tau, double* last_loss) {
  DifferentiableAdam adam(AdamHyper{.lr = lr});
  for (std::size_t t = 0; t < c.inner_steps; ++t) {
    const GnnOutput out = gnn_forward(batch, prop, theta);
    const Var loss = inner_loss(out.predictions, batch.labels, task, theta, c.inner_l2);
    require_finite(loss, "inner loss", tau, t);
    if (last_loss) *last_loss = loss.value().item();
    const auto grads = Tape::grad(loss, theta, GradMode::kCreateGraph);
    theta = c.inner_optimizer == InnerOptimizer::kSgd ? sgd_step_differentiable(theta, grads, lr)
                                                      : adam.step(theta, grads);
  }
  return theta;
}

inline std::vector<double> column(const Tensor& t) { return t.values(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// One outer evaluation

struct OuterResult {
  double outer_loss = 0.0;
  double inner_loss = 0.0;  // at the last inner step
  std::vector<Tensor> phi_grad;
  ModelParams theta_final;
};

/// Builds Z on the inner-train graphs, trains theta for T steps from
/// `theta0`, then evaluates the outer loss on the support graphs. With
/// `want_grad` the gradient w.r.t. Phi is taken through the whole trajectory.
inline OuterResult outer_objective(const Dataset& ds, std::span<const std::size_t> inner_train,
                                   std::span<const std::size_t> support, const ModelParams& phi,
                                   const ModelParams& theta0, const TrainConfig& c,
                                   bool want_grad = true, std::size_t tau = 0) {
  const GraphBatch btr = GraphBatch::of(ds, inner_train);
  const GraphBatch bsu = GraphBatch::of(ds, support);
  Tape tape;
  const std::vector<Var> phi_vars = phi.leaves(tape);
  const std::vector<Var> theta_vars = theta0.leaves(tape);

  const Var ztr = influence(btr, phi_vars);
  const Propagation ptr = make_propagation(btr, ztr);
  OuterResult r;
  const auto theta_T =
      detail::inner_loop(btr, ptr, theta_vars, ds.task, c, c.inner_lr, tau, &r.inner_loss);

  const Var zsu = influence(bsu, phi_vars);
  const GnnOutput out = gnn_forward(bsu, zsu, theta_T);
  const Var F = outer_loss(out.predictions, bsu.labels, ds.task, zsu, bsu.num_graphs, phi_vars, c);
  detail::require_finite(F, "outer loss", tau, c.inner_steps);
  r.outer_loss = F.value().item();
  if (want_grad) {
    for (const Var& g : Tape::grad(F, phi_vars, GradMode::kNoGraph)) r.phi_grad.push_back(g.value());
  }
  r.theta_final = theta0;
  r.theta_final.assign(theta_T);
  return r;
}

// ---------------------------------------------------------------------------
// Prediction and validation

/// Raw model outputs (logits or values) for the given graphs. With `phi`
/// the predictor sees the explainer's influences, otherwise Z = 1.
inline std::vector<double> predict(const Dataset& ds, std::span<const std::size_t> indices,
                                   const ModelParams* phi, const ModelParams& theta) {
  const GraphBatch b = GraphBatch::of(ds, indices);
  const auto theta_vars = theta.constants();
  Var z;
  if (phi) {
    const auto phi_vars = phi->constants();
    z = influence(b, phi_vars);
  }
  return gnn_forward(b, z, theta_vars).predictions.value().values();
}

/// AUC for classification, MSE for regression.
inline double task_metric(TaskKind task, std::span<const double> pred, std::span<const double> y) {
  return task == TaskKind::kClassification ? auc(pred, y) : mean_squared_error(pred, y);
}

inline bool metric_improves(TaskKind task, double candidate, double best) {
  return task == TaskKind::kClassification ? candidate > best : candidate < best;
}

inline std::vector<double> labels_of(const Dataset& ds, std::span<const std::size_t> indices) {
  std::vector<double> y;
  for (std::size_t i : indices) y.push_back(ds.graphs.at(i).label);
  return y;
}

inline ModelDims predictor_dims(const Dataset& ds, const TrainConfig& c) {
  return ModelDims{.input = ds.feature_dim, .width = c.width, .layers = 3, .head_in_factor = 1, .output = 1};
}

/// Seed of theta_0 for outer step tau; shared by all methods so runs pair.
inline std::uint64_t theta_seed(std::uint64_t run_seed, std::size_t tau) {
  return run_seed * 1000003ULL + tau;
}

// ---------------------------------------------------------------------------
// Trainers

/// Called once per outer step with the log row and the explainer the row
/// was validated with.
using ProgressFn = std::function<void(const LogRow&, const ModelParams&)>;

namespace detail {

struct EarlyStopper {
  TaskKind task;
  std::size_t patience;
  std::optional<double> best;
  std::size_t bad = 0;

  /// Returns true when `metric` is a new best.
  bool update(double metric) {
    if (!best || metric_improves(task, metric, *best)) {
      best = metric;
      bad = 0;
      return true;
    }
    ++bad;
    return false;
  }
  bool exhausted() const { return bad >= patience; }
};

inline void check_splits(const Dataset& ds, const SplitIndices& s) {
  if (s.train.size() < 2) throw ParameterError("training split needs at least 2 graphs");
  if (s.val.empty()) throw ParameterError("validation split is empty");
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (std::size_t i : *part) {
      if (i >= ds.size()) throw ContractError("split index out of range");
    }
  }
}

}  // namespace detail

/// The bilevel algorithm and its keep-base-model variant.
inline TrainerOutput run_bilevel(const Dataset& ds, const SplitIndices& splits,
                                 const TrainConfig& c, Method method,
                                 const ProgressFn& progress = {}) {
  c.validate();
  detail::check_splits(ds, splits);
  const auto start = std::chrono::steady_clock::now();
  const ModelDims pdims = predictor_dims(ds, c);
  ModelParams phi = init_explainer(explainer_dims(ds.feature_dim, c.width), c.seed);
  AdamState adam = AdamState::for_params(phi.tensors);
  const AdamHyper outer{.lr = c.outer_lr};
  const std::vector<double> yval = labels_of(ds, splits.val);

  TrainerOutput out;
  out.method = method;
  detail::EarlyStopper stopper{ds.task, c.patience, std::nullopt, 0};
  std::optional<ModelParams> carried;
  for (std::size_t tau = 0; tau < c.outer_steps; ++tau) {
    const auto [itr, sup] = resplit_train_support(splits.train, c.seed, tau);
    const ModelParams theta0 = (method == Method::kKeep && carried)
                                   ? *carried
                                   : reinitialize(pdims, theta_seed(c.seed, tau));
    OuterResult r = outer_objective(ds, itr, sup, phi, theta0, c, true, tau);

    // Validation pairs theta_T with the Phi that produced its training Z.
    const std::vector<double> pv = predict(ds, splits.val, &phi, r.theta_final);
    for (double v : pv) {
      if (!std::isfinite(v)) throw DivergenceError("validation prediction is not finite",
                                                   static_cast<int>(tau), static_cast<int>(c.inner_steps));
    }
    const double val = task_metric(ds.task, pv, yval);
    if (stopper.update(val)) {
      out.phi = phi;
      out.theta = r.theta_final;
      out.best_step = tau;
    }
    LogRow row{tau, r.inner_loss, r.outer_loss, val,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    out.log.push_back(row);
    out.stop_step = tau;
    if (progress) progress(row, phi);

    adam_step(adam, phi.tensors, r.phi_grad, outer);
    if (method == Method::kKeep) carried = r.theta_final;
    if (stopper.exhausted()) break;
  }
  return out;
}

inline TrainerOutput run_rage(const Dataset& ds, const SplitIndices& s, const TrainConfig& c,
                              const ProgressFn& progress = {}) {
  return run_bilevel(ds, s, c, Method::kRage, progress);
}

inline TrainerOutput run_rage_keep(const Dataset& ds, const SplitIndices& s, const TrainConfig& c,
                                   const ProgressFn& progress = {}) {
  return run_bilevel(ds, s, c, Method::kKeep, progress);
}

/// Single-level ablation: Phi and theta updated together on one loss over
/// the whole training split, T joint steps per outer step, no
/// reinitialisation and no support set.
inline TrainerOutput run_rage_single(const Dataset& ds, const SplitIndices& splits,
                                     const TrainConfig& c, const ProgressFn& progress = {}) {
  c.validate();
  detail::check_splits(ds, splits);
  const auto start = std::chrono::steady_clock::now();
  ModelParams phi = init_explainer(explainer_dims(ds.feature_dim, c.width), c.seed);
  ModelParams theta = reinitialize(predictor_dims(ds, c), theta_seed(c.seed, 0));
  AdamState adam_phi = AdamState::for_params(phi.tensors);
  AdamState adam_theta = AdamState::for_params(theta.tensors);
  const AdamHyper hphi{.lr = c.outer_lr};
  const AdamHyper htheta{.lr = c.inner_lr};
  const GraphBatch btr = GraphBatch::of(ds, splits.train);
  const std::vector<double> yval = labels_of(ds, splits.val);

  TrainerOutput out;
  out.method = Method::kSingle;
  detail::EarlyStopper stopper{ds.task, c.patience, std::nullopt, 0};
  for (std::size_t tau = 0; tau < c.outer_steps; ++tau) {
    double loss_value = 0.0;
    for (std::size_t t = 0; t < c.inner_steps; ++t) {
      Tape tape;
      const auto phi_vars = phi.leaves(tape);
      const auto theta_vars = theta.leaves(tape);
      const Var z = influence(btr, phi_vars);
      const GnnOutput o = gnn_forward(btr, z, theta_vars);
      Var loss = inner_loss(o.predictions, btr.labels, ds.task, theta_vars, c.inner_l2);
      if (c.outer_l1 != 0.0) loss = add(loss, scale(l1_term(z, btr.num_graphs, c.l1_reduction), c.outer_l1));
      if (c.outer_l2 != 0.0) loss = add(loss, scale(l2_penalty(phi_vars), c.outer_l2));
      detail::require_finite(loss, "joint loss", tau, t);
      loss_value = loss.value().item();
      std::vector<Var> all = phi_vars;
      all.insert(all.end(), theta_vars.begin(), theta_vars.end());
      const auto g = Tape::grad(loss, all);
      std::vector<Tensor> gphi, gtheta;
      for (std::size_t i = 0; i < g.size(); ++i) {
        (i < phi_vars.size() ? gphi : gtheta).push_back(g[i].value());
      }
      adam_step(adam_phi, phi.tensors, gphi, hphi);
      adam_step(adam_theta, theta.tensors, gtheta, htheta);
    }
    const std::vector<double> pv = predict(ds, splits.val, &phi, theta);
    const double val = task_metric(ds.task, pv, yval);
    if (stopper.update(val)) {
      out.phi = phi;
      out.theta = theta;
      out.best_step = tau;
    }
    LogRow row{tau, loss_value, loss_value, val,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    out.log.push_back(row);
    out.stop_step = tau;
    if (progress) progress(row, phi);
    if (stopper.exhausted()) break;
  }
  return out;
}

inline TrainerOutput run_method(const Dataset& ds, const SplitIndices& s, const TrainConfig& c,
                                Method m, const ProgressFn& progress = {}) {
  return m == Method::kSingle ? run_rage_single(ds, s, c, progress) : run_bilevel(ds, s, c, m, progress);
}

/// Plain predictor (Z = 1) trained single-level with the same budget:
/// T Adam steps per outer step, early stopping on validation.
inline ModelParams train_plain_gnn(const Dataset& ds, const SplitIndices& splits,
                                   const TrainConfig& c) {
  c.validate();
  detail::check_splits(ds, splits);
  ModelParams theta = reinitialize(predictor_dims(ds, c), theta_seed(c.seed, 0));
  AdamState adam = AdamState::for_params(theta.tensors);
  const AdamHyper h{.lr = c.inner_lr};
  const GraphBatch btr = GraphBatch::of(ds, splits.train);
  const Propagation prop = make_propagation(btr, Var());
  const std::vector<double> yval = labels_of(ds, splits.val);
  detail::EarlyStopper stopper{ds.task, c.patience, std::nullopt, 0};
  ModelParams best = theta;
  for (std::size_t tau = 0; tau < c.outer_steps; ++tau) {
    for (std::size_t t = 0; t < c.inner_steps; ++t) {
      Tape tape;
      const auto vars = theta.leaves(tape);
      const GnnOutput o = gnn_forward(btr, prop, vars);
      const Var loss = inner_loss(o.predictions, btr.labels, ds.task, vars, c.inner_l2);
      detail::require_finite(loss, "plain loss", tau, t);
      std::vector<Tensor> g;
      for (const Var& v : Tape::grad(loss, vars)) g.push_back(v.value());
      adam_step(adam, theta.tensors, g, h);
    }
    const double val = task_metric(ds.task, predict(ds, splits.val, nullptr, theta), yval);
    if (stopper.update(val)) best = theta;
    if (stopper.exhausted()) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Training log

inline void save_training_log(const std::vector<LogRow>& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "tau,train_loss,support_loss,val_metric,wall_seconds\n";
  out.precision(17);
  for (const LogRow& r : log) {
    out << r.outer_step << ',' << r.train_loss << ',' << r.support_loss << ',' << r.val_metric
        << ',' << r.wall_seconds << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace antehoc
