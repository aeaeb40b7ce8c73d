// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "triaug/diffcore/tensor.hpp"
#include "triaug/random.hpp"

namespace triaug::data {

// Feature-space analogue of RandAugment's photometric pool.
enum class AugmentOp : std::uint8_t {
  gaussian_noise,
  feature_scaling,
  feature_dropout,
  intensity_shift,
  window_permutation,
};

std::string_view to_string(AugmentOp op);

struct AugmentationPolicy {
  std::size_t num_ops = 2;
  double magnitude = 0.3;
  std::vector<AugmentOp> op_pool = {AugmentOp::gaussian_noise, AugmentOp::feature_scaling,
                                    AugmentOp::feature_dropout, AugmentOp::intensity_shift,
                                    AugmentOp::window_permutation};

  void validate() const;
};

// Largest shuffled window, reached at magnitude 1.
inline constexpr std::size_t kMaxPermutationWindow = 8;

/// Applies one op in place. Magnitude 0 leaves x untouched for every op.
void apply_augment_op(AugmentOp op, std::span<double> x, double magnitude, Rng& rng);

/// Samples `num_ops` ops uniformly (with replacement) and applies them in order.
std::vector<double> rand_augment(std::span<const double> x, const AugmentationPolicy& policy, Rng& rng);

/// Row-wise rand_augment over a [n x d] batch.
diff::Tensor rand_augment_rows(const diff::Tensor& batch, const AugmentationPolicy& policy, Rng& rng);

/// x_mix = lambda * x_i + (1 - lambda) * x_j, elementwise.
diff::Tensor mix(const diff::Tensor& x_i, const diff::Tensor& x_j, double lambda);
/// x_rmix = (1 - lambda) * x_i + lambda * x_j, i.e. mix(x_i, x_j, 1 - lambda).
diff::Tensor reverse_mix(const diff::Tensor& x_i, const diff::Tensor& x_j, double lambda);

/// Draws lambda ~ Beta(1, 1) on the dyadic grid k / 2^32, k in [0, 2^32].
/// On that grid 1 - (1 - lambda) == lambda exactly, which keeps the
/// mix/reverse-mix conjugation bit-exact.
double sample_lambda(Rng& rng);

/// One mixup draw for a batch: x_j and the j-labels are the batch rows under
/// a random permutation. S2 and S3 of one step consume the same triple.
struct MixupTriple {
  diff::Tensor x_i;
  diff::Tensor x_j;
  std::vector<std::size_t> y_i;
  std::vector<std::size_t> y_j;
  std::vector<std::uint8_t> y_star_i;
  std::vector<std::uint8_t> y_star_j;
  double lambda = 0.5;
};

MixupTriple make_triple(const diff::Tensor& x, std::span<const std::size_t> y,
                        std::span<const std::uint8_t> y_star, Rng& rng);

}  // namespace triaug::data
