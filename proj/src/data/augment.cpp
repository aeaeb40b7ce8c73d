// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "triaug/errors.hpp"

namespace triaug::data {

namespace {

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DegenerateInputError("mixing weight lambda=" + std::to_string(lambda) + " outside [0, 1]");
  }
}

diff::Tensor blend(const diff::Tensor& a, const diff::Tensor& b, double wa, double wb) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mix: incompatible shapes " + diff::to_string(a.shape()) + " and " +
                     diff::to_string(b.shape()));
  }
  diff::Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

}  // namespace

std::string_view to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::gaussian_noise: return "gaussian_noise";
    case AugmentOp::feature_scaling: return "feature_scaling";
    case AugmentOp::feature_dropout: return "feature_dropout";
    case AugmentOp::intensity_shift: return "intensity_shift";
    case AugmentOp::window_permutation: return "window_permutation";
  }
  return "?";
}

void AugmentationPolicy::validate() const {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) throw ConfigError("augmentation magnitude must lie in [0, 1]");
  if (num_ops > 0 && op_pool.empty()) throw ConfigError("augmentation op pool is empty");
}

void apply_augment_op(AugmentOp op, std::span<double> x, double magnitude, Rng& rng) {
  if (magnitude == 0.0 || x.empty()) return;
  switch (op) {
    case AugmentOp::gaussian_noise: {
      std::normal_distribution<double> noise(0.0, magnitude * rms(x));
      for (double& v : x) v += noise(rng);
      break;
    }
    case AugmentOp::feature_scaling: {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (double& v : x) v *= 1.0 + magnitude * u(rng);
      break;
    }
    case AugmentOp::feature_dropout: {
      std::bernoulli_distribution drop(0.5 * magnitude);
      for (double& v : x) {
        if (drop(rng)) v = 0.0;
      }
      break;
    }
    case AugmentOp::intensity_shift: {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const double shift = magnitude * rms(x) * u(rng);
      for (double& v : x) v += shift;
      break;
    }
    case AugmentOp::window_permutation: {
      const auto width = std::min<std::size_t>(
          x.size(), static_cast<std::size_t>(std::lround(magnitude * static_cast<double>(kMaxPermutationWindow))));
      if (width < 2) return;
      std::uniform_int_distribution<std::size_t> start(0, x.size() - width);
      const std::size_t s = start(rng);
      std::shuffle(x.begin() + static_cast<std::ptrdiff_t>(s),
                   x.begin() + static_cast<std::ptrdiff_t>(s + width), rng);
      break;
    }
  }
}

std::vector<double> rand_augment(std::span<const double> x, const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  std::vector<double> out(x.begin(), x.end());
  if (policy.num_ops == 0) return out;
  std::uniform_int_distribution<std::size_t> choose(0, policy.op_pool.size() - 1);
  for (std::size_t i = 0; i < policy.num_ops; ++i) {
    apply_augment_op(policy.op_pool[choose(rng)], out, policy.magnitude, rng);
  }
  return out;
}

diff::Tensor rand_augment_rows(const diff::Tensor& batch, const AugmentationPolicy& policy, Rng& rng) {
  diff::Tensor out = batch;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    std::vector<double> row = rand_augment(batch.row(r), policy, rng);
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

diff::Tensor mix(const diff::Tensor& x_i, const diff::Tensor& x_j, double lambda) {
  check_lambda(lambda);
  return blend(x_i, x_j, lambda, 1.0 - lambda);
}

diff::Tensor reverse_mix(const diff::Tensor& x_i, const diff::Tensor& x_j, double lambda) {
  check_lambda(lambda);
  return mix(x_i, x_j, 1.0 - lambda);
}

double sample_lambda(Rng& rng) {
  constexpr std::uint64_t kGrid = std::uint64_t{1} << 32;
  std::uniform_int_distribution<std::uint64_t> k(0, kGrid);
  return static_cast<double>(k(rng)) / static_cast<double>(kGrid);
}

MixupTriple make_triple(const diff::Tensor& x, std::span<const std::size_t> y,
                        std::span<const std::uint8_t> y_star, Rng& rng) {
  const std::size_t n = x.rows();
  if (y.size() != n || y_star.size() != n) {
    throw ShapeError("make_triple: label count does not match " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  MixupTriple t;
  t.x_i = x;
  t.x_j = diff::Tensor(x.shape());
  t.y_i.assign(y.begin(), y.end());
  t.y_star_i.assign(y_star.begin(), y_star.end());
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(x.row(perm[r]).begin(), x.row(perm[r]).end(), t.x_j.row(r).begin());
    t.y_j.push_back(y[perm[r]]);
    t.y_star_j.push_back(y_star[perm[r]]);
  }
  t.lambda = sample_lambda(rng);
  return t;
}

}  // namespace triaug::data
