// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "triaug/errors.hpp"
#include "triaug/metrics/metrics.hpp"
#include "triaug/random.hpp"

namespace triaug::metrics {
namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t below(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

BinaryScoredSet random_set(Rng& rng, bool ties) {
  BinaryScoredSet s;
  const std::size_t n = 2 + below(rng, 49);
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(ties ? static_cast<double>(below(rng, 5)) : uniform(rng, -1, 1));
    s.labels.push_back(static_cast<std::uint8_t>(below(rng, 2)));
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc({{0.9, 0.4, 0.6, 0.1}, {1, 0, 1, 0}}), 1.0);
  EXPECT_EQ(auroc({{3, 3, 3, 3}, {1, 0, 1, 0}}), 0.5);
  EXPECT_EQ(auroc({{0.1, 0.9}, {1, 0}}), 0.0);
  EXPECT_THROW(auroc({{1, 2}, {1, 1}}), DegenerateInputError);
  EXPECT_THROW(auroc({{1, 2}, {1}}), DegenerateInputError);
}

TEST(Auroc, MatchesPairwiseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(rng, trial % 2 == 0);
    ASSERT_EQ(auroc(s), oracle::auroc(s)) << "trial " << trial;
  }
}

TEST(Auroc, NegationComplementsWithoutTies) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_set(rng, false);
    const double a = auroc(s);
    for (double& v : s.scores) v = -v;
    EXPECT_NEAR(a + auroc(s), 1.0, 1e-12);
  }
}

TEST(FprAtTpr, Examples) {
  EXPECT_EQ(fpr_at_tpr({{5, 6, 7, 1, 2}, {1, 1, 1, 0, 0}}), 0.0);
  EXPECT_EQ(fpr_at_tpr({{1, 2, 7, 8}, {1, 1, 0, 0}}), 1.0);
  // 20 positives and 20 negatives with the same values 1..20: the threshold
  // keeps 19 positives (t = 2) and so 19 negatives
  BinaryScoredSet same;
  for (int v = 1; v <= 20; ++v) {
    same.scores.insert(same.scores.end(), {double(v), double(v)});
    same.labels.insert(same.labels.end(), {1, 0});
  }
  EXPECT_EQ(fpr_at_tpr(same), 0.95);
}

TEST(FprAtTpr, MatchesThresholdEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(rng, trial % 2 == 0);
    ASSERT_EQ(fpr_at_tpr(s), oracle::fpr(s, 0.95)) << "trial " << trial;
    ASSERT_EQ(fpr_at_tpr(s, 0.5), oracle::fpr(s, 0.5)) << "trial " << trial;
  }
}

TEST(ThresholdAtTpr, KeepsTheTarget) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(threshold_at_tpr(v, 1.0), 1.0);
  EXPECT_EQ(threshold_at_tpr(v, 0.75), 2.0);
  EXPECT_EQ(threshold_at_tpr(v, 0.7), 2.0);
  EXPECT_EQ(threshold_at_tpr(v, 0.25), 4.0);
}

TEST(AveragePrecision, HandExample) {
  // thresholds 0.9 (P=1,R=1/2), 0.6 (P=1/2,R=1/2), 0.4 (P=2/3,R=1), 0.1 (P=1/2,R=1)
  const BinaryScoredSet s{{0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0}};
  EXPECT_NEAR(average_precision(s), 0.5 * 1.0 + 0.5 * 2.0 / 3.0, 1e-15);
  EXPECT_EQ(average_precision(s), oracle::average_precision(s));
  EXPECT_EQ(average_precision({{0.9, 0.8, 0.2}, {1, 1, 0}}), 1.0);
}

TEST(AveragePrecision, MatchesThresholdEnumeration) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(rng, trial % 2 == 0);
    ASSERT_NEAR(average_precision(s), oracle::average_precision(s), 1e-12) << "trial " << trial;
  }
}

TEST(AveragePrecision, RandomScorerNearPrevalence) {
  Rng rng(5);
  double total = 0;
  for (int shuffle = 0; shuffle < 1000; ++shuffle) {
    BinaryScoredSet s;
    for (int i = 0; i < 200; ++i) {
      s.scores.push_back(uniform(rng, 0, 1));
      s.labels.push_back(i < 60 ? 1 : 0);
    }
    total += average_precision(s);
  }
  EXPECT_NEAR(total / 1000, 0.3, 0.05);
}

TEST(Aupr, InAndOutPerfectAtHalfPrevalence) {
  const std::vector<double> id{5, 6, 7}, ood{1, 2, 3};
  EXPECT_EQ(aupr(id, ood, Positive::in_distribution), 1.0);
  EXPECT_EQ(aupr(id, ood, Positive::out_of_distribution), 1.0);
  const auto out = make_ood_set(id, ood, Positive::out_of_distribution);
  EXPECT_EQ(out.scores[0], -5.0);
  EXPECT_EQ(out.labels[0], 0);
  EXPECT_EQ(out.labels[3], 1);
}

TEST(Metrics, InvariantUnderIncreasingTransform) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_set(rng, trial % 2 == 0);
    const double a = auroc(s), f = fpr_at_tpr(s), p = average_precision(s);
    for (double& v : s.scores) v = std::exp(3 * v) + 7;
    EXPECT_EQ(auroc(s), a);
    EXPECT_EQ(fpr_at_tpr(s), f);
    EXPECT_EQ(average_precision(s), p);
  }
}

TEST(ClassificationReport, PerfectAndHeadOnly) {
  const std::vector<std::size_t> t{0, 1, 2, 2};
  const auto perfect = classification_report(t, t, 3);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);

  std::vector<std::size_t> truth(100, 0), pred(100, 0);
  std::fill(truth.begin() + 90, truth.end(), 1);
  const auto r = classification_report(pred, truth, 2);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 0.45);
  EXPECT_DOUBLE_EQ(r.f1, (2 * 0.9 / 1.9) / 2);
  EXPECT_EQ(r.per_class[1].f1, 0.0);
  EXPECT_EQ(r.per_class[1].support, 10u);
}

TEST(ClassificationReport, MacroF1IsNotHarmonicMeanOfMacros) {
  // class 0: P=1, R=1/2; class 1: P=1/3, R=1
  const std::vector<std::size_t> truth{0, 0, 1}, pred{0, 1, 1};
  const auto r = classification_report(pred, truth, 2);
  EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.5);
  const double f0 = 2.0 / 3.0, f1 = 2.0 / 3.0;
  EXPECT_DOUBLE_EQ(r.f1, (f0 + f1) / 2);
  const double harmonic = 2 * r.precision * r.recall / (r.precision + r.recall);
  EXPECT_GT(std::abs(r.f1 - harmonic), 1e-3);
}

TEST(ClassificationReport, Errors) {
  const std::vector<std::size_t> a{0, 1}, b{0};
  EXPECT_THROW(classification_report(a, b, 2), DegenerateInputError);
  const std::vector<std::size_t> c{0, 3};
  EXPECT_THROW(classification_report(c, a, 2), DegenerateInputError);
}

TEST(OodReport, UsesIdAsPositive) {
  const std::vector<double> id{0.9, 0.8, 0.7}, ood{0.1, 0.85};
  const auto r = ood_report(id, ood);
  EXPECT_DOUBLE_EQ(r.auroc, 4.0 / 6.0);
  EXPECT_EQ(r.fpr_at_95, 0.5);
  EXPECT_EQ(r.aupr_in, aupr(id, ood, Positive::in_distribution));
  EXPECT_EQ(r.aupr_out, aupr(id, ood, Positive::out_of_distribution));
}

}  // namespace
}  // namespace triaug::metrics
