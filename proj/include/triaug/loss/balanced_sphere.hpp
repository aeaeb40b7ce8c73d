// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "triaug/data/augment.hpp"
#include "triaug/data/dataset.hpp"
#include "triaug/diffcore/graph.hpp"

namespace triaug::loss {

/// Benign/malignant split of the ID classes: m_c = 1 for malignant.
class MaskM {
 public:
  MaskM() = default;
  /// Throws DegenerateInputError unless both groups are non-empty.
  explicit MaskM(std::vector<std::uint8_t> m);

  std::span<const std::uint8_t> bits() const noexcept { return m_; }
  std::size_t size() const noexcept { return m_.size(); }
  bool malignant(std::size_t c) const { return m_.at(c) != 0; }

 private:
  std::vector<std::uint8_t> m_;
};

/// Index of the binary hypersphere target: malignant -> 0, benign -> 1,
/// matching the concatenation order of hyper_logits.
inline std::size_t hyper_index(std::uint8_t y_star) noexcept { return y_star ? 0 : 1; }

enum class HyperAggregation : std::uint8_t {
  sum,        // literal sum of adjusted logits per group
  logsumexp,  // log-sum-exp per group
};

struct LossOptions {
  bool hypersphere = true;
  bool prior_adjustment = true;
  HyperAggregation aggregation = HyperAggregation::sum;
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_h = 0.0;
  double l_bs = 0.0;
};

struct LossTerms {
  diff::Var l_s;
  diff::Var l_h;  // unbound when the hypersphere term is disabled
  diff::Var l_bs;

  LossBreakdown values() const;
};

/// Per-sample labels of one loss evaluation.
struct Targets {
  std::span<const std::size_t> y;
  std::span<const std::uint8_t> y_star;
};

/// g' = g + log(pi), broadcast over rows.
diff::Var adjust_logits(diff::Var logits, const data::ClassPriors& priors);
std::vector<double> adjust_logits(std::span<const double> logits, const data::ClassPriors& priors);

/// (1/N) sum over states and samples of -log softmax(g'_state)[y_n].
diff::Var subsphere_loss(std::span<const diff::Var> adjusted, std::span<const std::size_t> y);

/// [malignant mass, benign mass] per row.
diff::Var hyper_logits(diff::Var adjusted, const MaskM& mask,
                       HyperAggregation aggregation = HyperAggregation::sum);

diff::Var hypersphere_loss(std::span<const diff::Var> adjusted, std::span<const std::uint8_t> y_star,
                           const MaskM& mask, HyperAggregation aggregation = HyperAggregation::sum);

/// L_bs = L_s + L_h over raw cosine logits, one entry per state.
LossTerms balanced_sphere_loss(std::span<const diff::Var> logits, Targets targets,
                               const data::ClassPriors& priors, const MaskM& mask,
                               const LossOptions& options = {});

/// lambda * L_bs(g, y_i) + (1 - lambda) * L_bs(g, y_j), g = logits of x_mix.
diff::Var mixup_loss(diff::Var mixed_logits, const data::MixupTriple& triple,
                     const data::ClassPriors& priors, const MaskM& mask, const LossOptions& options = {});
/// (1 - lambda) * L_bs(g, y_i) + lambda * L_bs(g, y_j), g = logits of x_rmix.
diff::Var reverse_mixup_loss(diff::Var rmixed_logits, const data::MixupTriple& triple,
                             const data::ClassPriors& priors, const MaskM& mask,
                             const LossOptions& options = {});

/// Value-level evaluation on a private graph.
LossBreakdown evaluate_balanced_sphere(std::span<const diff::Tensor> logits, Targets targets,
                                       const data::ClassPriors& priors, const MaskM& mask,
                                       const LossOptions& options = {});

}  // namespace triaug::loss
