// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/model/triaug_model.hpp"

#include <algorithm>
#include <cmath>

#include "triaug/diffcore/ops.hpp"
#include "triaug/errors.hpp"
#include "triaug/random.hpp"

namespace triaug::model {

std::string_view to_string(StateKind kind) {
  switch (kind) {
    case StateKind::clean: return "clean";
    case StateKind::mix: return "mix";
    case StateKind::rmix: return "rmix";
  }
  return "?";
}

StateKind parse_state_kind(std::string_view text) {
  if (text == "clean") return StateKind::clean;
  if (text == "mix") return StateKind::mix;
  if (text == "rmix") return StateKind::rmix;
  throw ConfigError("unknown state kind '" + std::string(text) + "' (expected clean, mix or rmix)");
}

void TriAugConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("model.embed_dim must be positive");
  if (hidden_sizes.empty()) throw ConfigError("model.hidden_sizes must not be empty");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw ConfigError("model.hidden_sizes entries must be positive");
  }
  if (embed_dim > *std::min_element(hidden_sizes.begin(), hidden_sizes.end())) {
    throw ConfigError("model.embed_dim must not exceed the smallest hidden size");
  }
  if (!(cosine_scale > 0.0) || !std::isfinite(cosine_scale)) {
    throw ConfigError("model.cosine_scale must be positive");
  }
}

std::vector<std::pair<std::string, diff::Shape>> TriAugModel::layout() const {
  std::vector<std::pair<std::string, diff::Shape>> out;
  for (std::size_t b = 0; b < num_backbones(); ++b) {
    std::size_t in = input_dim_;
    const std::size_t layers = config_.hidden_sizes.size() + 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t width = l < config_.hidden_sizes.size() ? config_.hidden_sizes[l] : config_.embed_dim;
      const std::string prefix = "backbone" + std::to_string(b) + ".layer" + std::to_string(l);
      out.emplace_back(prefix + ".weight", diff::Shape{in, width});
      out.emplace_back(prefix + ".bias", diff::Shape{width});
      in = width;
    }
  }
  for (std::size_t k = 0; k < kNumStates; ++k) {
    out.emplace_back("classifier" + std::to_string(k) + ".weight", diff::Shape{num_classes_, config_.embed_dim});
  }
  return out;
}

std::size_t TriAugModel::layer_index(std::size_t backbone, std::size_t layer) const {
  return 2 * (backbone * (config_.hidden_sizes.size() + 1) + layer);
}

std::size_t TriAugModel::classifier_index(std::size_t branch) const {
  return 2 * num_backbones() * (config_.hidden_sizes.size() + 1) + branch;
}

TriAugModel::TriAugModel(TriAugConfig config, std::size_t input_dim, std::size_t num_classes, std::uint64_t seed)
    : config_(std::move(config)), input_dim_(input_dim), num_classes_(num_classes) {
  config_.validate();
  if (input_dim_ == 0 || num_classes_ < 2) throw ConfigError("model needs input_dim > 0 and at least 2 classes");
  std::size_t stream = 0;
  for (auto& [name, shape] : layout()) {
    diff::Tensor value(shape);
    Rng rng(derive_seed(seed, stream++));
    if (name.ends_with(".weight")) {
      // He initialization for backbone layers; classifier rows only need a direction.
      const double stddev = name.starts_with("classifier") ? 1.0 : std::sqrt(2.0 / static_cast<double>(shape[0]));
      std::normal_distribution<double> normal(0.0, stddev);
      for (double& v : value.values()) v = normal(rng);
    }
    params_.push_back({name, std::move(value)});
  }
}

TriAugModel::TriAugModel(TriAugConfig config, std::size_t input_dim, std::size_t num_classes,
                         std::vector<diff::Parameter> parameters)
    : config_(std::move(config)), input_dim_(input_dim), num_classes_(num_classes), params_(std::move(parameters)) {
  config_.validate();
  const auto expected = layout();
  if (expected.size() != params_.size()) {
    throw ShapeError("model expects " + std::to_string(expected.size()) + " parameter arrays, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (params_[i].name != expected[i].first || params_[i].value.shape() != expected[i].second) {
      throw ShapeError("parameter " + std::to_string(i) + ": expected " + expected[i].first + " " +
                       diff::to_string(expected[i].second) + ", got " + params_[i].name + " " +
                       diff::to_string(params_[i].value.shape()));
    }
    if (!params_[i].value.all_finite()) throw NumericError("parameter " + params_[i].name + " is not finite");
  }
}

std::vector<diff::Var> TriAugModel::bind(diff::Graph& graph, bool trainable) const {
  std::vector<diff::Var> out;
  out.reserve(params_.size());
  for (const diff::Parameter& p : params_) {
    out.push_back(trainable ? graph.parameter(p.value) : graph.constant(p.value));
  }
  return out;
}

BranchOutput TriAugModel::forward_state(std::span<const diff::Var> bound, std::size_t branch, diff::Var x) const {
  if (branch >= kNumStates) throw ShapeError("branch index " + std::to_string(branch) + " out of range");
  if (bound.size() != params_.size()) throw GraphError("bound parameter list does not match the model");
  if (x.value().cols() != input_dim_) {
    throw ShapeError("model input has " + std::to_string(x.value().cols()) + " features, expected " +
                     std::to_string(input_dim_));
  }
  const std::size_t b = backbone_of(branch);
  const std::size_t layers = config_.hidden_sizes.size() + 1;
  diff::Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t idx = layer_index(b, l);
    h = diff::add_row(diff::matmul(h, bound[idx]), bound[idx + 1]);
    if (l + 1 < layers) h = diff::relu(h);
    if (!h.value().all_finite()) {
      throw NumericError("non-finite activation in backbone" + std::to_string(b) + ".layer" + std::to_string(l));
    }
  }
  const diff::Var w = bound[classifier_index(branch)];
  const diff::Var cos = diff::matmul(diff::l2_normalize(h, kCosineNormFloor),
                                     diff::transpose(diff::l2_normalize(w, kCosineNormFloor)));
  return {h, diff::scale(cos, config_.cosine_scale)};
}

diff::Var TriAugModel::average_logits(std::span<const diff::Var> bound, diff::Var x) const {
  diff::Var total = forward_state(bound, 0, x).logits;
  for (std::size_t k = 1; k < kNumStates; ++k) total = diff::add(total, forward_state(bound, k, x).logits);
  return diff::scale(total, 1.0 / static_cast<double>(kNumStates));
}

BranchValues TriAugModel::forward_state(std::size_t branch, const diff::Tensor& x) const {
  diff::Graph g;
  const auto bound = bind(g, false);
  const BranchOutput out = forward_state(bound, branch, g.constant(x));
  return {out.embedding.value(), out.logits.value()};
}

diff::Tensor TriAugModel::embed(const diff::Tensor& x) const {
  diff::Graph g;
  const auto bound = bind(g, false);
  const diff::Var input = g.constant(x);
  diff::Tensor total = forward_state(bound, 0, input).embedding.value();
  if (config_.share_backbone) return total;
  for (std::size_t k = 1; k < kNumStates; ++k) total += forward_state(bound, k, input).embedding.value();
  for (double& v : total.values()) v /= static_cast<double>(kNumStates);
  return total;
}

diff::Tensor TriAugModel::average_logits(const diff::Tensor& x) const {
  diff::Graph g;
  const auto bound = bind(g, false);
  return average_logits(bound, g.constant(x)).value();
}

std::vector<std::size_t> TriAugModel::predict(const diff::Tensor& x) const {
  const diff::Tensor logits = average_logits(x);
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

diff::Tensor normalize_embedding(const diff::Tensor& f) {
  diff::Tensor z = f;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    double s = 0.0;
    for (double v : row) s += v * v;
    if (s == 0.0) throw DegenerateInputError("cannot normalize a zero embedding (row " + std::to_string(r) + ")");
    const double n = std::sqrt(s);
    for (double& v : row) v /= n;
  }
  return z;
}

}  // namespace triaug::model
