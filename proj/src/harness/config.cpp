// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/harness/config.hpp"

#include <cstdio>
#include <set>

#include "triaug/common/keyvalue.hpp"
#include "triaug/errors.hpp"

namespace triaug::harness {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + section + "' must be an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown field '" + (section.empty() ? "" : section + ".") + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + section + "." + key + "' has the wrong type");
  }
}

model::StateTriple read_states(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != model::kNumStates) {
    throw ConfigError("'" + where + "' must list exactly 3 states");
  }
  model::StateTriple out{};
  for (std::size_t k = 0; k < model::kNumStates; ++k) {
    if (!j[k].is_string()) throw ConfigError("'" + where + "' entries must be strings");
    out[k] = model::parse_state_kind(j[k].get<std::string>());
  }
  return out;
}

json states_json(const model::StateTriple& s) {
  json out = json::array();
  for (auto k : s) out.push_back(std::string(model::to_string(k)));
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  dataset.validate();
  effective_model().validate();
  training.validate();
  if (ood.k == 0) throw ConfigError("ood.k must be positive");
  if (!(ood.tpr_target > 0.0 && ood.tpr_target <= 1.0)) throw ConfigError("ood.tpr_target must lie in (0, 1]");
  if (!(ood.odin_temperature > 0.0)) throw ConfigError("ood.odin_temperature must be positive");
  if (!(ood.odin_epsilon >= 0.0)) throw ConfigError("ood.odin_epsilon must be non-negative");
  if (!(ood.mahalanobis_shrinkage >= 0.0)) throw ConfigError("ood.mahalanobis_shrinkage must be non-negative");
  if (ood.threads == 0) throw ConfigError("ood.threads must be positive");
}

model::TriAugConfig ExperimentConfig::effective_model() const {
  model::TriAugConfig m = model;
  if (ablation.states_enabled) m.states_enabled = *ablation.states_enabled;
  return m;
}

loss::LossOptions ExperimentConfig::loss_options() const {
  return {!ablation.disable_hypersphere, !ablation.disable_prior_adjustment, ablation.hyper_aggregation};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j, "", {"name", "dataset", "model", "training", "ood", "ablation"});
  read(j, "name", c.name, "config");

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    reject_unknown(d, "dataset",
                   {"id_classes", "ood_classes", "feature_dim", "imbalance_ratio", "head_class_size",
                    "ood_class_size", "near_ood_classes", "cluster_separation", "center_concentration", "intra_class_spread",
                    "far_ood_distance", "benign_fraction", "min_group_size", "max_group_size", "seed"});
    auto& s = c.dataset;
    read(d, "id_classes", s.id_classes, "dataset");
    read(d, "ood_classes", s.ood_classes, "dataset");
    read(d, "feature_dim", s.feature_dim, "dataset");
    read(d, "imbalance_ratio", s.imbalance_ratio, "dataset");
    read(d, "head_class_size", s.head_class_size, "dataset");
    read(d, "ood_class_size", s.ood_class_size, "dataset");
    read(d, "near_ood_classes", s.near_ood_classes, "dataset");
    read(d, "cluster_separation", s.cluster_separation, "dataset");
    read(d, "center_concentration", s.center_concentration, "dataset");
    read(d, "intra_class_spread", s.intra_class_spread, "dataset");
    read(d, "far_ood_distance", s.far_ood_distance, "dataset");
    read(d, "benign_fraction", s.benign_fraction, "dataset");
    read(d, "min_group_size", s.min_group_size, "dataset");
    read(d, "max_group_size", s.max_group_size, "dataset");
    read(d, "seed", s.seed, "dataset");
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown(m, "model", {"embed_dim", "hidden_sizes", "cosine_scale", "share_backbone", "states_enabled"});
    read(m, "embed_dim", c.model.embed_dim, "model");
    read(m, "hidden_sizes", c.model.hidden_sizes, "model");
    read(m, "cosine_scale", c.model.cosine_scale, "model");
    read(m, "share_backbone", c.model.share_backbone, "model");
    if (m.contains("states_enabled")) c.model.states_enabled = read_states(m["states_enabled"], "model.states_enabled");
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    reject_unknown(t, "training",
                   {"epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "seed", "augment"});
    read(t, "epochs", c.training.epochs, "training");
    read(t, "batch_size", c.training.batch_size, "training");
    read(t, "learning_rate", c.training.learning_rate, "training");
    read(t, "momentum", c.training.momentum, "training");
    read(t, "weight_decay", c.training.weight_decay, "training");
    read(t, "seed", c.training.seed, "training");
    if (t.contains("augment")) {
      const json& a = t["augment"];
      reject_unknown(a, "training.augment", {"num_ops", "magnitude"});
      read(a, "num_ops", c.training.augment.num_ops, "training.augment");
      read(a, "magnitude", c.training.augment.magnitude, "training.augment");
    }
  }
  if (j.contains("ood")) {
    const json& o = j["ood"];
    reject_unknown(o, "ood", {"k", "tpr_target", "odin_temperature", "odin_epsilon", "mahalanobis_shrinkage", "threads"});
    read(o, "k", c.ood.k, "ood");
    read(o, "tpr_target", c.ood.tpr_target, "ood");
    read(o, "odin_temperature", c.ood.odin_temperature, "ood");
    read(o, "odin_epsilon", c.ood.odin_epsilon, "ood");
    read(o, "mahalanobis_shrinkage", c.ood.mahalanobis_shrinkage, "ood");
    read(o, "threads", c.ood.threads, "ood");
  }
  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    reject_unknown(a, "ablation",
                   {"states_enabled", "disable_hypersphere", "disable_prior_adjustment", "hyper_aggregation"});
    if (a.contains("states_enabled") && !a["states_enabled"].is_null()) {
      c.ablation.states_enabled = read_states(a["states_enabled"], "ablation.states_enabled");
    }
    read(a, "disable_hypersphere", c.ablation.disable_hypersphere, "ablation");
    read(a, "disable_prior_adjustment", c.ablation.disable_prior_adjustment, "ablation");
    if (a.contains("hyper_aggregation")) {
      std::string agg;
      read(a, "hyper_aggregation", agg, "ablation");
      if (agg == "sum") {
        c.ablation.hyper_aggregation = loss::HyperAggregation::sum;
      } else if (agg == "logsumexp") {
        c.ablation.hyper_aggregation = loss::HyperAggregation::logsumexp;
      } else {
        throw ConfigError("ablation.hyper_aggregation must be 'sum' or 'logsumexp'");
      }
    }
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& s = c.dataset;
  json j;
  j["name"] = c.name;
  j["dataset"] = {{"id_classes", s.id_classes},
                  {"ood_classes", s.ood_classes},
                  {"feature_dim", s.feature_dim},
                  {"imbalance_ratio", s.imbalance_ratio},
                  {"head_class_size", s.head_class_size},
                  {"ood_class_size", s.ood_class_size},
                  {"near_ood_classes", s.near_ood_classes},
                  {"cluster_separation", s.cluster_separation},
                  {"center_concentration", s.center_concentration},
                  {"intra_class_spread", s.intra_class_spread},
                  {"far_ood_distance", s.far_ood_distance},
                  {"benign_fraction", s.benign_fraction},
                  {"min_group_size", s.min_group_size},
                  {"max_group_size", s.max_group_size},
                  {"seed", s.seed}};
  j["model"] = {{"embed_dim", c.model.embed_dim},
                {"hidden_sizes", c.model.hidden_sizes},
                {"cosine_scale", c.model.cosine_scale},
                {"share_backbone", c.model.share_backbone},
                {"states_enabled", states_json(c.model.states_enabled)}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"learning_rate", c.training.learning_rate},
                   {"momentum", c.training.momentum},
                   {"weight_decay", c.training.weight_decay},
                   {"seed", c.training.seed},
                   {"augment", {{"num_ops", c.training.augment.num_ops}, {"magnitude", c.training.augment.magnitude}}}};
  j["ood"] = {{"k", c.ood.k},
              {"tpr_target", c.ood.tpr_target},
              {"odin_temperature", c.ood.odin_temperature},
              {"odin_epsilon", c.ood.odin_epsilon},
              {"mahalanobis_shrinkage", c.ood.mahalanobis_shrinkage},
              {"threads", c.ood.threads}};
  j["ablation"] = {{"states_enabled", c.ablation.states_enabled ? states_json(*c.ablation.states_enabled) : json()},
                   {"disable_hypersphere", c.ablation.disable_hypersphere},
                   {"disable_prior_adjustment", c.ablation.disable_prior_adjustment},
                   {"hyper_aggregation",
                    c.ablation.hyper_aggregation == loss::HyperAggregation::sum ? "sum" : "logsumexp"}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string canonical_text(const ExperimentConfig& config) { return config_to_json(config).dump(); }

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace triaug::harness
