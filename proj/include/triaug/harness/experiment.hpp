// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triaug/common/keyvalue.hpp"
#include "triaug/data/dataset.hpp"
#include "triaug/harness/config.hpp"
#include "triaug/metrics/metrics.hpp"
#include "triaug/model/checkpoint.hpp"
#include "triaug/model/training.hpp"
#include "triaug/ood/scorers.hpp"

namespace triaug::harness {

namespace fs = std::filesystem;

/// Split used by every command: 7:1:2 at group level.
inline constexpr data::SplitRatios kSplitRatios{0.7, 0.1, 0.2};

enum class Scorer : std::uint8_t { msp, odin, mahalanobis, knn };
inline constexpr std::array<Scorer, 4> kAllScorers{Scorer::msp, Scorer::odin, Scorer::mahalanobis, Scorer::knn};

std::string_view scorer_name(Scorer s);  // MSP, ODIN, MD, KNN
Scorer parse_scorer(std::string_view text);
/// Comma-separated names ("all" allowed); result is deduplicated and in
/// table order.
std::vector<Scorer> parse_scorer_list(std::string_view text);

struct TrainResult {
  model::Checkpoint checkpoint;
  std::vector<model::EpochLog> epochs;
};

/// Trains on the train split of `dataset`. The checkpoint metadata carries the
/// canonical config and its hash.
TrainResult train_experiment(const ExperimentConfig& config, const data::Dataset& dataset, std::ostream& log,
                             data::AccessLog* access = nullptr);

struct ScorerRow {
  Scorer scorer = Scorer::knn;
  double tau = 0.0;
  double calibration_tpr = 0.0;  // fraction of ID validation scores >= tau
  metrics::MetricReport report;
  ood::ScoreReport scores;  // ID test rows first, then OOD test rows
};

struct EvalResult {
  std::string config_hash;
  std::size_t k = 0;
  bool k_clamped = false;
  ood::EmbeddingBank bank;
  metrics::ClassificationReport id;
  std::vector<ScorerRow> rows;
  data::AccessLog access;
  std::size_t ood_reads_before_test = 0;

  const ScorerRow& row(Scorer s) const;
};

/// Bank from the train split, tau from ID validation scores, metrics on the
/// test split. Throws ShapeError if the checkpoint and dataset disagree.
EvalResult evaluate_experiment(const model::Checkpoint& checkpoint, const ExperimentConfig& config,
                               const data::Dataset& dataset, std::span<const Scorer> scorers, std::ostream& log);

/// Metric columns shared by the eval and compare tables, as percentages.
inline constexpr const char* kMetricColumns = "f1,recall,precision,auroc,fpr95,aupr_in,aupr_out";
std::string metric_fields(const metrics::ClassificationReport& id, const metrics::MetricReport& ood);

std::string eval_csv(const EvalResult& result);
KeyValueDoc metrics_document(const EvalResult& result);
std::string scores_csv(const ood::ScoreReport& report);
std::string train_log_csv(const model::StateTriple& states, std::span<const model::EpochLog> epochs);

struct RunRecord {
  ExperimentConfig config;
  fs::path checkpoint_path;
  fs::path bank_path;
  EvalResult eval;
  std::vector<model::EpochLog> epochs;
  double wall_clock_seconds = 0.0;
};

void save_run_record(const RunRecord& record, const fs::path& path);

// Subcommands. `log` receives the human-readable progress output.

data::Dataset cmd_gen_data(const ExperimentConfig& config, const fs::path& out, std::ostream& log);

TrainResult cmd_train(const ExperimentConfig& config, const fs::path& data_dir, const fs::path& out,
                      std::ostream& log);

/// Uses the config embedded in the checkpoint; `ood_override`, when given,
/// replaces its ood section.
EvalResult cmd_eval(const fs::path& checkpoint_dir, const fs::path& data_dir, std::span<const Scorer> scorers,
                    const fs::path& out, std::ostream& log, const OodConfig* ood_override = nullptr);

struct CompareRow {
  std::string name;
  std::string config_hash;
  model::StateTriple states{};
  metrics::ClassificationReport id;
  metrics::MetricReport ood;  // KNN scorer
};

inline constexpr const char* kCompareFile = "compare.csv";

/// Train + eval per config over one shared dataset (loaded from `data_dir`,
/// or generated into out/data when empty). compare.csv is rewritten after
/// every finished run, so a failing run leaves the earlier rows on disk.
std::vector<CompareRow> cmd_compare(std::span<const ExperimentConfig> configs, const fs::path& data_dir,
                                    const fs::path& out, std::ostream& log);

std::string compare_csv(std::span<const CompareRow> rows);

}  // namespace triaug::harness
