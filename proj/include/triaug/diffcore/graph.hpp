// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "triaug/diffcore/tensor.hpp"

namespace triaug::diff {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// owning graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Inputs handed to an op's vector-Jacobian product. `in_grads[i]` is null
/// when input i does not require a gradient; otherwise the VJP accumulates
/// into it.
struct BackwardContext {
  const Tensor& out_value;
  const Tensor& out_grad;
  std::span<const Tensor* const> in_values;
  std::span<Tensor* const> in_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Result of Graph::backward: d(loss)/d(leaf) for every differentiable leaf.
class Gradients {
 public:
  /// Throws GraphError if `leaf` was not created as a differentiable leaf of
  /// the graph that produced these gradients.
  const Tensor& operator[](Var leaf) const;
  bool contains(Var leaf) const noexcept;
  std::size_t nodes_visited() const noexcept { return visited_; }

 private:
  friend class Graph;
  const Graph* graph_ = nullptr;
  std::vector<std::optional<Tensor>> grads_;
  std::size_t visited_ = 0;
};

/// Tape of primitive operations. Nodes are appended in evaluation order, so
/// creation order is a valid topological order. One backward per graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Differentiable leaf (a trainable parameter).
  Var parameter(Tensor value);
  /// Leaf input; `differentiable` makes its gradient available (ODIN).
  Var input(Tensor value, bool differentiable = false);
  Var constant(Tensor value) { return input(std::move(value), false); }

  /// Appends a computed node. Used by the primitive ops.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn vjp);

  Gradients backward(Var loss);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn vjp;
    bool requires_grad = false;
    bool differentiable_leaf = false;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace triaug::diff
