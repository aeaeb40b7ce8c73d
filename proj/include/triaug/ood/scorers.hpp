// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "triaug/data/dataset.hpp"
#include "triaug/diffcore/tensor.hpp"
#include "triaug/model/triaug_model.hpp"

namespace triaug::ood {

/// Unit-norm training embeddings with their class labels.
struct EmbeddingBank {
  diff::Tensor z;  // [n x d]
  std::vector<std::uint16_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return z.cols(); }
};

inline constexpr double kBankNormTolerance = 1e-5;

/// Averaged branch embeddings of `x`, normalized per row. A zero embedding
/// raises DegenerateInputError naming the row.
diff::Tensor normalized_embeddings(const model::TriAugModel& model, const diff::Tensor& x);

/// Clean forward passes of every training sample, normalized.
EmbeddingBank build_bank(const model::TriAugModel& model, const data::SplitView& train);

/// -d'_k: the negated k-th smallest Euclidean distance from `z` to the bank
/// (k is 1-indexed). Requires 1 <= k <= bank size.
double knn_score(std::span<const double> z, const EmbeddingBank& bank, std::size_t k);

/// knn_score for every row of `z`. With `threads` > 1 rows are scored on
/// worker threads; each score is computed by the same sequential scan, so the
/// output does not depend on the thread count.
std::vector<double> knn_scores(const diff::Tensor& z, const EmbeddingBank& bank, std::size_t k,
                               unsigned threads = 1);

/// min(k, n); sets `clamped` when k had to be reduced.
std::size_t clamp_k(std::size_t k, std::size_t n, bool* clamped = nullptr);

/// Largest tau such that at least `tpr_target` of the scores satisfy s >= tau.
double calibrate_tau(std::span<const double> id_val_scores, double tpr_target = 0.95);

/// max_c softmax(logits / temperature)_c
double max_softmax(std::span<const double> logits, double temperature = 1.0);
double msp_score(std::span<const double> logits);
std::vector<double> msp_scores(const diff::Tensor& logits);

struct OdinParams {
  double temperature = 1000.0;
  double epsilon = 1e-3;
};

/// Temperature-scaled MSP on the input perturbed one signed-gradient step in
/// the direction that raises log max softmax(g / T). Logits are the mean over
/// the three branches.
std::vector<double> odin_scores(const model::TriAugModel& model, const diff::Tensor& x, const OdinParams& params);

/// Class means and a shared covariance with diagonal shrinkage.
struct MahalanobisModel {
  diff::Tensor mu;         // [C x d]
  diff::Tensor sigma;      // [d x d]
  diff::Tensor precision;  // sigma^-1
};

/// Factors `sigma`; NumericError if it is not positive definite.
MahalanobisModel make_mahalanobis(diff::Tensor mu, diff::Tensor sigma);

/// Pooled within-class covariance of the bank plus shrinkage * I. Every class
/// needs at least two bank vectors.
MahalanobisModel fit_mahalanobis(const EmbeddingBank& bank, std::size_t num_classes, double shrinkage = 1e-3);

/// -min_c (z - mu_c)^T sigma^-1 (z - mu_c)
double mahalanobis_score(std::span<const double> z, const MahalanobisModel& model);

enum class Origin : std::uint8_t { id, ood };

struct ScoreRecord {
  double score = 0.0;
  Origin decision = Origin::id;
  Origin origin = Origin::id;
  std::size_t predicted = 0;
  std::optional<std::size_t> truth;  // ID samples only
};

/// decision == id iff score >= tau.
struct ScoreReport {
  double tau = 0.0;
  std::vector<ScoreRecord> records;

  void add(double score, Origin origin, std::size_t predicted, std::optional<std::size_t> truth);
};

/// `TAEB`, u32 n, u32 d, n*d float32 row-major, n u16 labels; little-endian.
void save_bank(const EmbeddingBank& bank, const std::filesystem::path& path);
EmbeddingBank load_bank(const std::filesystem::path& path);

}  // namespace triaug::ood
