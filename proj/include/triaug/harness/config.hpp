// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "triaug/data/dataset.hpp"
#include "triaug/loss/balanced_sphere.hpp"
#include "triaug/model/training.hpp"
#include "triaug/model/triaug_model.hpp"

namespace triaug::harness {

struct OodConfig {
  std::size_t k = 1000;  // clamped to the training-set size at evaluation
  double tpr_target = 0.95;
  double odin_temperature = 1000.0;
  double odin_epsilon = 1e-3;
  double mahalanobis_shrinkage = 1e-3;
  unsigned threads = 1;
};

struct AblationConfig {
  std::optional<model::StateTriple> states_enabled;  // overrides model.states_enabled
  bool disable_hypersphere = false;
  bool disable_prior_adjustment = false;
  loss::HyperAggregation hyper_aggregation = loss::HyperAggregation::sum;
};

/// Everything that determines an experiment. The JSON form uses these field
/// names verbatim; unknown keys are rejected.
struct ExperimentConfig {
  std::string name = "triaug";
  data::DatasetSpec dataset;
  model::TriAugConfig model;
  model::TrainingConfig training;
  OodConfig ood;
  AblationConfig ablation;

  void validate() const;
  model::TriAugConfig effective_model() const;
  loss::LossOptions loss_options() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully expanded JSON with sorted keys; identical configs give identical text.
std::string canonical_text(const ExperimentConfig& config);
/// 64-bit FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace triaug::harness
