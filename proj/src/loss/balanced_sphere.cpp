// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/loss/balanced_sphere.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "triaug/diffcore/ops.hpp"
#include "triaug/errors.hpp"

namespace triaug::loss {

namespace {

diff::Var sum_vars(std::span<const diff::Var> terms) {
  diff::Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = diff::add(total, terms[i]);
  return total;
}

// -(1/N) * sum_n log_softmax(v)[n, target_n]
diff::Var mean_nll(diff::Var v, std::span<const std::size_t> target) {
  const double n = static_cast<double>(v.value().rows());
  return diff::scale(diff::sum(diff::pick(diff::log_softmax(v), target)), -1.0 / n);
}

void require_states(std::span<const diff::Var> states) {
  if (states.empty()) throw ShapeError("loss requires at least one state output");
}

}  // namespace

MaskM::MaskM(std::vector<std::uint8_t> m) : m_(std::move(m)) {
  const bool any_mal = std::any_of(m_.begin(), m_.end(), [](std::uint8_t b) { return b != 0; });
  const bool any_ben = std::any_of(m_.begin(), m_.end(), [](std::uint8_t b) { return b == 0; });
  if (!any_mal || !any_ben) {
    throw DegenerateInputError("mask must contain at least one benign and one malignant class");
  }
}

LossBreakdown LossTerms::values() const {
  LossBreakdown b;
  b.l_s = l_s.value().item();
  b.l_h = l_h.valid() ? l_h.value().item() : 0.0;
  b.l_bs = l_bs.value().item();
  return b;
}

diff::Var adjust_logits(diff::Var logits, const data::ClassPriors& priors) {
  const std::vector<double> log_pi = adjust_logits(std::vector<double>(priors.pi.size(), 0.0), priors);
  return diff::add_row(logits, logits.graph()->constant(diff::Tensor::vector(log_pi)));
}

std::vector<double> adjust_logits(std::span<const double> logits, const data::ClassPriors& priors) {
  if (logits.size() != priors.pi.size()) {
    throw ShapeError("adjust_logits: " + std::to_string(logits.size()) + " logits for " +
                     std::to_string(priors.pi.size()) + " priors");
  }
  std::vector<double> out(logits.begin(), logits.end());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (!(priors.pi[c] > 0.0)) {
      throw DegenerateInputError("adjust_logits: prior of class " + std::to_string(c) + " is not positive");
    }
    out[c] += std::log(priors.pi[c]);
  }
  return out;
}

diff::Var subsphere_loss(std::span<const diff::Var> adjusted, std::span<const std::size_t> y) {
  require_states(adjusted);
  std::vector<diff::Var> per_state;
  per_state.reserve(adjusted.size());
  for (const diff::Var& g : adjusted) per_state.push_back(mean_nll(g, y));
  return sum_vars(per_state);
}

diff::Var hyper_logits(diff::Var adjusted, const MaskM& mask, HyperAggregation aggregation) {
  if (mask.size() == 0) throw DegenerateInputError("hyper_logits: empty mask");
  std::vector<std::uint8_t> benign(mask.size());
  for (std::size_t c = 0; c < mask.size(); ++c) benign[c] = mask.malignant(c) ? 0 : 1;
  if (aggregation == HyperAggregation::logsumexp) {
    return diff::concat(diff::masked_logsumexp(adjusted, mask.bits()), diff::masked_logsumexp(adjusted, benign));
  }
  return diff::concat(diff::masked_sum(adjusted, mask.bits()), diff::masked_sum(adjusted, benign));
}

diff::Var hypersphere_loss(std::span<const diff::Var> adjusted, std::span<const std::uint8_t> y_star,
                           const MaskM& mask, HyperAggregation aggregation) {
  require_states(adjusted);
  std::vector<std::size_t> target(y_star.size());
  std::transform(y_star.begin(), y_star.end(), target.begin(), hyper_index);
  std::vector<diff::Var> per_state;
  per_state.reserve(adjusted.size());
  for (const diff::Var& g : adjusted) per_state.push_back(mean_nll(hyper_logits(g, mask, aggregation), target));
  return sum_vars(per_state);
}

LossTerms balanced_sphere_loss(std::span<const diff::Var> logits, Targets targets,
                               const data::ClassPriors& priors, const MaskM& mask,
                               const LossOptions& options) {
  require_states(logits);
  std::vector<diff::Var> adjusted;
  adjusted.reserve(logits.size());
  for (const diff::Var& g : logits) {
    if (g.value().cols() != mask.size()) {
      throw ShapeError("balanced_sphere_loss: logits " + diff::to_string(g.shape()) + " for a mask of " +
                       std::to_string(mask.size()) + " classes");
    }
    adjusted.push_back(options.prior_adjustment ? adjust_logits(g, priors) : g);
  }
  LossTerms terms;
  terms.l_s = subsphere_loss(adjusted, targets.y);
  if (options.hypersphere) {
    terms.l_h = hypersphere_loss(adjusted, targets.y_star, mask, options.aggregation);
    terms.l_bs = diff::add(terms.l_h, terms.l_s);
  } else {
    terms.l_bs = terms.l_s;
  }
  return terms;
}

namespace {

diff::Var weighted_pair(diff::Var logits, Targets first, double w_first, Targets second, double w_second,
                        const data::ClassPriors& priors, const MaskM& mask, const LossOptions& options) {
  const diff::Var states[] = {logits};
  const diff::Var a = balanced_sphere_loss(states, first, priors, mask, options).l_bs;
  const diff::Var b = balanced_sphere_loss(states, second, priors, mask, options).l_bs;
  return diff::add(diff::scale(a, w_first), diff::scale(b, w_second));
}

}  // namespace

diff::Var mixup_loss(diff::Var mixed_logits, const data::MixupTriple& triple, const data::ClassPriors& priors,
                     const MaskM& mask, const LossOptions& options) {
  const double lambda = triple.lambda;
  return weighted_pair(mixed_logits, {triple.y_i, triple.y_star_i}, lambda, {triple.y_j, triple.y_star_j},
                       1.0 - lambda, priors, mask, options);
}

diff::Var reverse_mixup_loss(diff::Var rmixed_logits, const data::MixupTriple& triple,
                             const data::ClassPriors& priors, const MaskM& mask, const LossOptions& options) {
  const double lambda = triple.lambda;
  return weighted_pair(rmixed_logits, {triple.y_i, triple.y_star_i}, 1.0 - lambda, {triple.y_j, triple.y_star_j},
                       lambda, priors, mask, options);
}

LossBreakdown evaluate_balanced_sphere(std::span<const diff::Tensor> logits, Targets targets,
                                       const data::ClassPriors& priors, const MaskM& mask,
                                       const LossOptions& options) {
  diff::Graph g;
  std::vector<diff::Var> vars;
  for (const diff::Tensor& t : logits) vars.push_back(g.constant(t));
  return balanced_sphere_loss(vars, targets, priors, mask, options).values();
}

}  // namespace triaug::loss
