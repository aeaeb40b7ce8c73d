// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "triaug/data/augment.hpp"
#include "triaug/data/dataset.hpp"
#include "triaug/diffcore/optimizer.hpp"
#include "triaug/loss/balanced_sphere.hpp"
#include "triaug/model/triaug_model.hpp"
#include "triaug/random.hpp"

namespace triaug::model {

struct Batch {
  diff::Tensor x;  // [n x d]
  std::vector<std::size_t> y;
  std::vector<std::uint8_t> y_star;
};

Batch make_batch(const data::SplitView& view, std::span<const std::size_t> positions);

struct StepOptions {
  data::AugmentationPolicy augment;
  loss::LossOptions loss;
  // Overrides the Beta(1,1) draw of every mixup triple.
  std::optional<double> fixed_lambda;
};

/// Loss of each state slot in order (reported as L_S1, L_mix, L_rmix for the
/// default configuration) and their unweighted sum.
struct StepLosses {
  StateTriple kinds{};
  std::array<double, kNumStates> state{};
  double total = 0.0;
};

/// One optimization step over all three states.
///
/// clean slots train on rand-augmented rows with L_bs. The first mix slot and
/// the first rmix slot share one mixup triple; further slots of the same
/// kind draw their own. Non-finite losses raise NumericError.
StepLosses train_step(TriAugModel& model, const Batch& batch, const data::ClassPriors& priors,
                      const loss::MaskM& mask, diff::OptimizerState& optimizer, const StepOptions& options,
                      Rng& rng);

/// Same computation as train_step without the parameter update.
StepLosses evaluate_step(const TriAugModel& model, const Batch& batch, const data::ClassPriors& priors,
                         const loss::MaskM& mask, const StepOptions& options, Rng& rng);

struct TrainingConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::uint64_t seed = 0;
  data::AugmentationPolicy augment;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::array<double, kNumStates> state{};  // mean over the epoch's steps
  double total = 0.0;
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `model` for `config.epochs` passes over `train` with shuffled
/// mini-batches. Divergence raises NumericError naming the global step.
std::vector<EpochLog> fit(TriAugModel& model, const data::SplitView& train, const data::ClassPriors& priors,
                          const loss::MaskM& mask, const TrainingConfig& config,
                          const loss::LossOptions& loss_options, const EpochCallback& on_epoch = {});

/// Seed of the model initialization stream for a training seed.
std::uint64_t init_seed(std::uint64_t training_seed);

}  // namespace triaug::model
