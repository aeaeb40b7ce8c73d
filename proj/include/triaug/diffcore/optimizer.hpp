// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "triaug/diffcore/tensor.hpp"

namespace triaug::diff {

struct Parameter {
  std::string name;
  Tensor value;
};

/// SGD with classic (Polyak) momentum and L2 weight decay folded into the
/// gradient:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - learning_rate * v
struct OptimizerState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::vector<Tensor> velocity;  // lazily sized on the first step

  void validate() const;
};

/// Applies one update in place. All gradients are checked before any
/// parameter is touched; a non-finite gradient raises NumericError naming the
/// parameter.
void sgd_step(std::span<Parameter> params, std::span<const Tensor> grads, OptimizerState& state);

}  // namespace triaug::diff
