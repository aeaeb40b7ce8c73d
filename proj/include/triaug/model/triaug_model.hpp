// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triaug/diffcore/graph.hpp"
#include "triaug/diffcore/optimizer.hpp"
#include "triaug/diffcore/tensor.hpp"

namespace triaug::model {

enum class StateKind : std::uint8_t { clean, mix, rmix };

std::string_view to_string(StateKind kind);
StateKind parse_state_kind(std::string_view text);

inline constexpr std::size_t kNumStates = 3;
using StateTriple = std::array<StateKind, kNumStates>;

inline constexpr StateTriple kTriAugStates = {StateKind::clean, StateKind::mix, StateKind::rmix};

struct TriAugConfig {
  std::size_t embed_dim = 32;
  std::vector<std::size_t> hidden_sizes = {128, 64};
  double cosine_scale = 16.0;
  bool share_backbone = false;
  StateTriple states_enabled = kTriAugStates;

  void validate() const;
};

// Norm floor of the cosine classifier.
inline constexpr double kCosineNormFloor = 1e-12;

struct BranchOutput {
  diff::Var embedding;  // pre-normalization backbone output
  diff::Var logits;     // s * cos(w_c, e)
};

struct BranchValues {
  diff::Tensor embedding;
  diff::Tensor logits;
};

/// Three state branches, each an MLP backbone plus a bias-free cosine
/// classifier. With `share_backbone` one backbone feeds three classifiers.
///
/// Parameters are stored flat; names follow `backbone{b}.layer{l}.weight`,
/// `backbone{b}.layer{l}.bias` and `classifier{k}.weight`. Layer weights are
/// [in x out], classifier weights [C x embed_dim].
class TriAugModel {
 public:
  TriAugModel(TriAugConfig config, std::size_t input_dim, std::size_t num_classes, std::uint64_t seed);
  /// Rebuilds a model from stored parameters; names and shapes must match.
  TriAugModel(TriAugConfig config, std::size_t input_dim, std::size_t num_classes,
              std::vector<diff::Parameter> parameters);

  const TriAugConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t num_backbones() const noexcept { return config_.share_backbone ? 1 : kNumStates; }
  std::size_t backbone_of(std::size_t branch) const noexcept { return config_.share_backbone ? 0 : branch; }

  std::span<diff::Parameter> parameters() noexcept { return params_; }
  std::span<const diff::Parameter> parameters() const noexcept { return params_; }

  /// Places every parameter on `graph`, as differentiable leaves when
  /// `trainable`, otherwise as constants. Result is indexed like parameters().
  std::vector<diff::Var> bind(diff::Graph& graph, bool trainable) const;

  BranchOutput forward_state(std::span<const diff::Var> bound, std::size_t branch, diff::Var x) const;
  /// Mean of the three branches' logits.
  diff::Var average_logits(std::span<const diff::Var> bound, diff::Var x) const;

  BranchValues forward_state(std::size_t branch, const diff::Tensor& x) const;
  /// Average of the three branch embeddings on the raw input, [n x embed_dim].
  diff::Tensor embed(const diff::Tensor& x) const;
  diff::Tensor average_logits(const diff::Tensor& x) const;
  /// argmax of the averaged logits per row.
  std::vector<std::size_t> predict(const diff::Tensor& x) const;

 private:
  std::vector<std::pair<std::string, diff::Shape>> layout() const;
  std::size_t layer_index(std::size_t backbone, std::size_t layer) const;
  std::size_t classifier_index(std::size_t branch) const;

  TriAugConfig config_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  std::vector<diff::Parameter> params_;
};

/// Row-wise z = f / ||f||. A zero row raises DegenerateInputError.
diff::Tensor normalize_embedding(const diff::Tensor& f);

}  // namespace triaug::model
