// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/model/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "triaug/diffcore/ops.hpp"
#include "triaug/errors.hpp"

namespace triaug::model {

namespace {

constexpr std::uint64_t kInitStream = 7;
constexpr std::uint64_t kShuffleStream = 8;
constexpr std::uint64_t kStepStream = 9;

struct StepGraph {
  diff::Var total;
  StepLosses losses;
};

StepGraph build_step(diff::Graph& graph, std::span<const diff::Var> bound, const TriAugModel& model,
                     const Batch& batch, const data::ClassPriors& priors, const loss::MaskM& mask,
                     const StepOptions& options, Rng& rng) {
  const auto draw_triple = [&] {
    data::MixupTriple t = data::make_triple(batch.x, batch.y, batch.y_star, rng);
    if (options.fixed_lambda) t.lambda = *options.fixed_lambda;
    return t;
  };

  std::optional<data::MixupTriple> shared;
  bool mix_used = false;
  bool rmix_used = false;

  StepGraph out;
  out.losses.kinds = model.config().states_enabled;
  std::vector<diff::Var> slot_losses;
  for (std::size_t k = 0; k < kNumStates; ++k) {
    const StateKind kind = model.config().states_enabled[k];
    diff::Var slot;
    if (kind == StateKind::clean) {
      const diff::Tensor augmented = data::rand_augment_rows(batch.x, options.augment, rng);
      const diff::Var logits[] = {model.forward_state(bound, k, graph.constant(augmented)).logits};
      slot = loss::balanced_sphere_loss(logits, {batch.y, batch.y_star}, priors, mask, options.loss).l_bs;
    } else {
      bool& used = kind == StateKind::mix ? mix_used : rmix_used;
      data::MixupTriple fresh;
      const data::MixupTriple* triple = nullptr;
      if (!used) {
        if (!shared) shared = draw_triple();
        triple = &*shared;
        used = true;
      } else {
        fresh = draw_triple();
        triple = &fresh;
      }
      if (kind == StateKind::mix) {
        const diff::Tensor x_mix = data::mix(triple->x_i, triple->x_j, triple->lambda);
        const diff::Var logits = model.forward_state(bound, k, graph.constant(x_mix)).logits;
        slot = loss::mixup_loss(logits, *triple, priors, mask, options.loss);
      } else {
        const diff::Tensor x_rmix = data::reverse_mix(triple->x_i, triple->x_j, triple->lambda);
        const diff::Var logits = model.forward_state(bound, k, graph.constant(x_rmix)).logits;
        slot = loss::reverse_mixup_loss(logits, *triple, priors, mask, options.loss);
      }
    }
    out.losses.state[k] = slot.value().item();
    slot_losses.push_back(slot);
  }
  out.total = diff::add(diff::add(slot_losses[0], slot_losses[1]), slot_losses[2]);
  out.losses.total = out.total.value().item();
  return out;
}

}  // namespace

Batch make_batch(const data::SplitView& view, std::span<const std::size_t> positions) {
  Batch b;
  b.x = data::feature_matrix(view, positions);
  b.y.reserve(positions.size());
  b.y_star.reserve(positions.size());
  for (std::size_t p : positions) {
    const data::LabeledSample& s = view[p];
    b.y.push_back(s.y);
    b.y_star.push_back(s.y_star);
  }
  return b;
}

StepLosses train_step(TriAugModel& model, const Batch& batch, const data::ClassPriors& priors,
                      const loss::MaskM& mask, diff::OptimizerState& optimizer, const StepOptions& options,
                      Rng& rng) {
  diff::Graph graph;
  const auto bound = model.bind(graph, true);
  const StepGraph step = build_step(graph, bound, model, batch, priors, mask, options, rng);
  if (!std::isfinite(step.losses.total)) throw NumericError("training loss is not finite");

  const diff::Gradients grads = graph.backward(step.total);
  std::vector<diff::Tensor> g;
  g.reserve(bound.size());
  for (const diff::Var& v : bound) g.push_back(grads[v]);
  diff::sgd_step(model.parameters(), g, optimizer);
  return step.losses;
}

StepLosses evaluate_step(const TriAugModel& model, const Batch& batch, const data::ClassPriors& priors,
                         const loss::MaskM& mask, const StepOptions& options, Rng& rng) {
  diff::Graph graph;
  const auto bound = model.bind(graph, false);
  return build_step(graph, bound, model, batch, priors, mask, options, rng).losses;
}

void TrainingConfig::validate() const {
  if (epochs == 0) throw ConfigError("training.epochs must be positive");
  if (batch_size == 0) throw ConfigError("training.batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("training.learning_rate must be positive");
  }
  diff::OptimizerState{learning_rate, momentum, weight_decay, {}}.validate();
  augment.validate();
}

std::uint64_t init_seed(std::uint64_t training_seed) { return derive_seed(training_seed, kInitStream); }

std::vector<EpochLog> fit(TriAugModel& model, const data::SplitView& train, const data::ClassPriors& priors,
                          const loss::MaskM& mask, const TrainingConfig& config,
                          const loss::LossOptions& loss_options, const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw DegenerateInputError("cannot train on an empty split");

  diff::OptimizerState optimizer{config.learning_rate, config.momentum, config.weight_decay, {}};
  StepOptions options{config.augment, loss_options, std::nullopt};
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng step_rng(derive_seed(config.seed, kStepStream));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochLog> logs;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch + 1;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch = make_batch(train, std::span<const std::size_t>(order).subspan(start, end - start));
      StepLosses step;
      try {
        step = train_step(model, batch, priors, mask, optimizer, options, step_rng);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(global_step) + " (epoch " +
                           std::to_string(epoch + 1) + "): " + e.what());
      }
      for (std::size_t k = 0; k < kNumStates; ++k) log.state[k] += step.state[k];
      log.total += step.total;
      ++log.steps;
      ++global_step;
    }
    for (double& v : log.state) v /= static_cast<double>(log.steps);
    log.total /= static_cast<double>(log.steps);
    if (on_epoch) on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

}  // namespace triaug::model
