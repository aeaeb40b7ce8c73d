// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/diffcore/optimizer.hpp"

#include <cmath>

#include "triaug/errors.hpp"

namespace triaug::diff {

void OptimizerState::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be a finite non-negative number");
  }
}

void sgd_step(std::span<Parameter> params, std::span<const Tensor> grads, OptimizerState& state) {
  state.validate();
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("sgd_step: gradient " + to_string(grads[i].shape()) + " for parameter '" +
                       params[i].name + "' of shape " + to_string(params[i].value.shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("sgd_step: non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Parameter& p : params) state.velocity.push_back(Tensor::zeros_like(p.value));
  }
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer holds " + std::to_string(state.velocity.size()) +
                     " velocity buffers for " + std::to_string(params.size()) + " parameters");
  }

  const double lr = state.learning_rate;
  const double mu = state.momentum;
  const double wd = state.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& v = state.velocity[i];
    if (v.shape() != params[i].value.shape()) {
      throw ShapeError("sgd_step: velocity shape " + to_string(v.shape()) + " for parameter '" +
                       params[i].name + "' of shape " + to_string(params[i].value.shape()));
    }
    auto w = params[i].value.values();
    auto g = grads[i].values();
    auto vel = v.values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      vel[j] = mu * vel[j] + g[j] + wd * w[j];
      w[j] -= lr * vel[j];
    }
  }
}

}  // namespace triaug::diff
