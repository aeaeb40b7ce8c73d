// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "triaug/errors.hpp"

namespace triaug::metrics {

namespace {

// Indices ordered by descending score.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::size_t count_positives(const BinaryScoredSet& set) {
  return static_cast<std::size_t>(std::count_if(set.labels.begin(), set.labels.end(), [](auto l) { return l != 0; }));
}

}  // namespace

void BinaryScoredSet::validate() const {
  if (scores.size() != labels.size()) {
    throw DegenerateInputError("scored set has " + std::to_string(scores.size()) + " scores but " +
                               std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw DegenerateInputError("scored set contains NaN");
    if (labels[i]) ++pos;
  }
  if (pos == 0 || pos == scores.size()) {
    throw DegenerateInputError("scored set needs at least one positive and one negative");
  }
}

double auroc(const BinaryScoredSet& set) {
  set.validate();
  const std::size_t n = set.scores.size();
  const std::size_t n_pos = count_positives(set);
  const std::size_t n_neg = n - n_pos;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  // Twice the Mann-Whitney U as an integer: 2 per win, 1 per tie.
  std::uint64_t twice_u = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_here = 0, neg_here = 0;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) {
      (set.labels[order[j]] ? pos_here : neg_here) += 1;
      ++j;
    }
    twice_u += 2 * static_cast<std::uint64_t>(pos_here) * neg_below + static_cast<std::uint64_t>(pos_here) * neg_here;
    neg_below += neg_here;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double threshold_at_tpr(std::span<const double> positive_scores, double tpr_target) {
  if (positive_scores.empty()) throw DegenerateInputError("threshold_at_tpr: no positive scores");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw DegenerateInputError("threshold_at_tpr: target must lie in (0, 1]");
  }
  std::vector<double> sorted(positive_scores.begin(), positive_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // number of scores that must stay at or above the threshold; the slack
  // absorbs representation error in products such as 0.95 * 100
  auto keep = static_cast<std::size_t>(std::ceil(tpr_target * n - 1e-9 * n));
  keep = std::clamp<std::size_t>(keep, 1, sorted.size());
  return sorted[sorted.size() - keep];
}

double fpr_at_tpr(const BinaryScoredSet& set, double tpr_target) {
  set.validate();
  std::vector<double> pos;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    if (set.labels[i]) pos.push_back(set.scores[i]);
  }
  const double tau = threshold_at_tpr(pos, tpr_target);
  std::size_t neg = 0, neg_pass = 0;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    if (set.labels[i]) continue;
    ++neg;
    if (set.scores[i] >= tau) ++neg_pass;
  }
  return static_cast<double>(neg_pass) / static_cast<double>(neg);
}

double average_precision(const BinaryScoredSet& set) {
  set.validate();
  const std::size_t n = set.scores.size();
  const double n_pos = static_cast<double>(count_positives(set));
  const auto order = descending_order(set.scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    const double s = set.scores[order[i]];
    while (i < n && set.scores[order[i]] == s) {
      if (set.labels[order[i]]) ++tp;
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / n_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

BinaryScoredSet make_ood_set(std::span<const double> id_scores, std::span<const double> ood_scores,
                             Positive positive) {
  BinaryScoredSet set;
  const bool in = positive == Positive::in_distribution;
  for (double s : id_scores) {
    set.scores.push_back(in ? s : -s);
    set.labels.push_back(in ? 1 : 0);
  }
  for (double s : ood_scores) {
    set.scores.push_back(in ? s : -s);
    set.labels.push_back(in ? 0 : 1);
  }
  return set;
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores, Positive positive) {
  return average_precision(make_ood_set(id_scores, ood_scores, positive));
}

ClassificationReport classification_report(std::span<const std::size_t> predictions,
                                           std::span<const std::size_t> truths, std::size_t num_classes) {
  if (predictions.size() != truths.size()) {
    throw DegenerateInputError("classification_report: " + std::to_string(predictions.size()) +
                               " predictions for " + std::to_string(truths.size()) + " labels");
  }
  if (num_classes == 0) throw DegenerateInputError("classification_report: zero classes");
  std::vector<std::size_t> tp(num_classes, 0), predicted(num_classes, 0), actual(num_classes, 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i] >= num_classes || truths[i] >= num_classes) {
      throw DegenerateInputError("classification_report: label outside the " + std::to_string(num_classes) +
                                 " classes");
    }
    ++predicted[predictions[i]];
    ++actual[truths[i]];
    if (predictions[i] == truths[i]) ++tp[truths[i]];
  }
  ClassificationReport r;
  r.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    ClassMetrics& m = r.per_class[c];
    m.support = actual[c];
    m.precision = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    m.recall = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
  }
  const double c = static_cast<double>(num_classes);
  r.precision /= c;
  r.recall /= c;
  r.f1 /= c;
  return r;
}

MetricReport ood_report(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr_target) {
  MetricReport r;
  const BinaryScoredSet in = make_ood_set(id_scores, ood_scores, Positive::in_distribution);
  r.auroc = auroc(in);
  r.fpr_at_95 = fpr_at_tpr(in, tpr_target);
  r.aupr_in = average_precision(in);
  r.aupr_out = average_precision(make_ood_set(id_scores, ood_scores, Positive::out_of_distribution));
  return r;
}

}  // namespace triaug::metrics
