// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "triaug/diffcore/tensor.hpp"

namespace triaug::data {

/// Parameters of the synthetic long-tailed benchmark. Class sizes follow a
/// geometric profile from `head_class_size` down to
/// head_class_size / imbalance_ratio.
struct DatasetSpec {
  std::size_t id_classes = 8;
  std::size_t ood_classes = 5;
  std::size_t feature_dim = 64;
  double imbalance_ratio = 47.975;
  std::size_t head_class_size = 960;
  std::size_t ood_class_size = 60;
  // How many of the OOD classes sit between ID clusters; the rest are placed
  // far outside the ID sphere.
  std::size_t near_ood_classes = 0;
  // Radius of the sphere carrying the ID class centers.
  double cluster_separation = 10.0;
  // Pull of the ID center directions toward one shared anchor, in [0, 1).
  // 0 gives independent random directions (near-orthogonal, trivially
  // separable); larger values bring sibling classes close together.
  double center_concentration = 0.7;
  // Per-coordinate standard deviation of every class cluster.
  double intra_class_spread = 1.0;
  // Far-OOD centers lie at far_ood_distance * cluster_separation.
  double far_ood_distance = 2.0;
  double benign_fraction = 0.75;
  std::size_t min_group_size = 2;
  std::size_t max_group_size = 5;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_classes() const noexcept { return id_classes + ood_classes; }
};

struct LabeledSample {
  std::vector<float> x;
  std::uint32_t y = 0;
  std::uint8_t y_star = 0;  // 1 = malignant, 0 = benign
  std::uint32_t group_id = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<std::uint8_t> malignant;  // per class, ID classes first then OOD
  std::vector<LabeledSample> samples;

  std::size_t feature_dim() const noexcept { return spec.feature_dim; }
  std::size_t id_classes() const noexcept { return spec.id_classes; }
  bool is_ood(const LabeledSample& s) const noexcept { return s.y >= spec.id_classes; }
};

/// n_c = round(head * r^c) with r = imbalance_ratio^(-1/(C-1)).
std::vector<std::size_t> class_sizes(const DatasetSpec& spec);

/// m_c = 1 for malignant ID classes; spreads malignant classes evenly across
/// the frequency profile.
std::vector<std::uint8_t> malignant_mask(const DatasetSpec& spec);

Dataset generate(const DatasetSpec& spec);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
const char* to_string(Split split);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Counts every sample read through a SplitView, by split and by origin.
struct AccessLog {
  std::array<std::size_t, 3> reads{};
  std::array<std::size_t, 3> ood_reads{};

  void record(Split split, bool ood) noexcept {
    ++reads[static_cast<std::size_t>(split)];
    if (ood) ++ood_reads[static_cast<std::size_t>(split)];
  }
  std::size_t total_ood_reads() const noexcept { return ood_reads[0] + ood_reads[1] + ood_reads[2]; }
};

/// Read-only window onto one partition of a dataset.
class SplitView {
 public:
  SplitView(const Dataset& dataset, std::span<const std::size_t> indices, Split tag,
            AccessLog* log = nullptr)
      : dataset_(&dataset), indices_(indices), tag_(tag), log_(log) {}

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  Split tag() const noexcept { return tag_; }
  const Dataset& dataset() const noexcept { return *dataset_; }
  std::span<const std::size_t> indices() const noexcept { return indices_; }

  const LabeledSample& operator[](std::size_t i) const {
    const LabeledSample& s = dataset_->samples[indices_[i]];
    if (log_) log_->record(tag_, dataset_->is_ood(s));
    return s;
  }

 private:
  const Dataset* dataset_;
  std::span<const std::size_t> indices_;
  Split tag_;
  AccessLog* log_;
};

/// Index partition of a dataset. OOD samples only ever appear in `test`.
struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  const std::vector<std::size_t>& indices(Split s) const;
  SplitView view(const Dataset& dataset, Split s, AccessLog* log = nullptr) const {
    return SplitView(dataset, indices(s), s, log);
  }
};

/// Stratified, group-level split: every group_id lands in exactly one
/// partition. Requires at least three groups per ID class.
Splits split(const Dataset& dataset, SplitRatios ratios, std::uint64_t seed);

/// Per-class training frequencies pi_c = n_c / n, kept alongside the raw
/// counts so sums can be checked exactly.
struct ClassPriors {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  std::vector<double> pi;
};

ClassPriors class_priors(const SplitView& train, std::size_t num_classes);
ClassPriors priors_from_counts(std::vector<std::size_t> counts);

/// Stacks the features of the given view positions into a [n x d] matrix.
diff::Tensor feature_matrix(const SplitView& view, std::span<const std::size_t> positions);
diff::Tensor feature_matrix(const SplitView& view);

}  // namespace triaug::data
