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

#include <cmath>
#include <span>
#include <vector>

#include "antehoc/autodiff.hpp"
#include "antehoc/errors.hpp"
#include "antehoc/tensor.hpp"

namespace antehoc {

/// theta - lr * grad for each parameter. The results stay on the tape, so a
/// later loss differentiates through the update and through `grads`.
inline std::vector<Var> sgd_step_differentiable(std::span<const Var> params,
                                                std::span<const Var> grads, double lr) {
  if (params.size() != grads.size()) {
    throw ContractError("sgd_step_differentiable: " + std::to_string(params.size()) +
                        " params but " + std::to_string(grads.size()) + " grads");
  }
  if (!(lr >= 0.0)) throw ParameterError("sgd_step_differentiable: learning rate must be >= 0");
  std::vector<Var> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("sgd_step_differentiable: grad " + std::to_string(i) + " has shape " +
                       to_string(grads[i].shape()) + ", param has " + to_string(params[i].shape()));
    }
    out.push_back(lr == 0.0 ? params[i] : sub(params[i], scale(grads[i], lr)));
  }
  return out;
}

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for plain (non-differentiable) Adam.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;

  static AdamState for_params(std::span<const Tensor> params) {
    AdamState s;
    for (const Tensor& p : params) {
      s.m.emplace_back(p.rows(), p.cols());
      s.v.emplace_back(p.rows(), p.cols());
    }
    return s;
  }
};

/// One bias-corrected Adam update, in place. Used for the explainer, never
/// differentiated through.
inline void adam_step(AdamState& state, std::span<Tensor> params, std::span<const Tensor> grads,
                      const AdamHyper& h = {}) {
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw ContractError("adam_step: state, params and grads must align");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    if (m.shape() != p.shape() || g.shape() != p.shape()) {
      throw ShapeError("adam_step: moment/grad shape differs from parameter " + std::to_string(i));
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

/// Adam whose update is recorded on the tape. The denominator is
/// sqrt(vhat + eps^2) rather than sqrt(vhat) + eps so that its derivative
/// stays finite when a gradient entry is exactly zero.
class DifferentiableAdam {
 public:
  explicit DifferentiableAdam(AdamHyper h) : h_(h) {}

  std::vector<Var> step(std::span<const Var> params, std::span<const Var> grads) {
    if (params.size() != grads.size()) {
      throw ContractError("DifferentiableAdam: params and grads must align");
    }
    if (m_.empty()) {
      for (const Var& p : params) {
        m_.emplace_back(Tensor(p.rows(), p.cols()));
        v_.emplace_back(Tensor(p.rows(), p.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(h_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(h_.beta2, static_cast<double>(t_));
    std::vector<Var> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = add(scale(m_[i], h_.beta1), scale(grads[i], 1.0 - h_.beta1));
      v_[i] = add(scale(v_[i], h_.beta2), scale(mul(grads[i], grads[i]), 1.0 - h_.beta2));
      const Var denom = pow(add_scalar(scale(v_[i], 1.0 / c2), h_.eps * h_.eps), 0.5);
      out.push_back(sub(params[i], div(scale(m_[i], h_.lr / c1), denom)));
    }
    return out;
  }

 private:
  AdamHyper h_;
  std::vector<Var> m_;
  std::vector<Var> v_;
  long t_ = 0;
};

}  // namespace antehoc
