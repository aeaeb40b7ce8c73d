// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace triaug::metrics {

/// Scores with binary labels (1 = positive). Needs at least one positive and
/// one negative; higher scores mean "more positive".
struct BinaryScoredSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  void validate() const;
};

/// Mann-Whitney statistic P(pos > neg) + 0.5 P(tie), via one sort.
double auroc(const BinaryScoredSet& set);

/// Smallest-k threshold that keeps at least `tpr_target` of the positives:
/// the largest t with |{s >= t}| / n >= tpr_target.
double threshold_at_tpr(std::span<const double> positive_scores, double tpr_target);

/// Fraction of negatives at or above the threshold_at_tpr of the positives.
double fpr_at_tpr(const BinaryScoredSet& set, double tpr_target = 0.95);

/// Step-wise area under the precision-recall curve, sum (R_i - R_{i-1}) P_i
/// over distinct score thresholds in descending order.
double average_precision(const BinaryScoredSet& set);

enum class Positive : std::uint8_t { in_distribution, out_of_distribution };

/// Builds the scored set from ID (label 1) and OOD scores where a higher
/// score means "more in-distribution". For Positive::out_of_distribution the
/// scores are negated and labels flipped.
BinaryScoredSet make_ood_set(std::span<const double> id_scores, std::span<const double> ood_scores,
                             Positive positive = Positive::in_distribution);

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores, Positive positive);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::vector<ClassMetrics> per_class;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro, mean of per-class F1
};

/// Per-class precision/recall/F1 with 0 for empty denominators; macro means
/// are unweighted over the `num_classes` classes.
ClassificationReport classification_report(std::span<const std::size_t> predictions,
                                           std::span<const std::size_t> truths, std::size_t num_classes);

struct MetricReport {
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
  double aupr_in = 0.0;
  double aupr_out = 0.0;
  ClassificationReport id;
};

/// OOD metrics with ID as the positive class for AUROC and FPR@TPR.
MetricReport ood_report(std::span<const double> id_scores, std::span<const double> ood_scores,
                        double tpr_target = 0.95);

}  // namespace triaug::metrics
