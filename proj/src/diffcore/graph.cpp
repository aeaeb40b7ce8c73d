// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/diffcore/graph.hpp"

#include "triaug/errors.hpp"

namespace triaug::diff {

const Tensor& Var::value() const {
  if (!graph_) throw GraphError("use of an unbound variable");
  return graph_->value(*this);
}

const Tensor& Gradients::operator[](Var leaf) const {
  if (leaf.graph() != graph_ || leaf.id() >= grads_.size() || !grads_[leaf.id()]) {
    throw GraphError("no gradient recorded for node " + std::to_string(leaf.id()) +
                     " (not a differentiable leaf of this graph)");
  }
  return *grads_[leaf.id()];
}

bool Gradients::contains(Var leaf) const noexcept {
  return leaf.graph() == graph_ && leaf.id() < grads_.size() && grads_[leaf.id()].has_value();
}

Var Graph::parameter(Tensor value) { return input(std::move(value), true); }

Var Graph::input(Tensor value, bool differentiable) {
  if (consumed_) throw GraphError("graph already consumed by backward");
  Node node;
  node.value = std::move(value);
  node.requires_grad = differentiable;
  node.differentiable_leaf = differentiable;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> parents, BackwardFn vjp) {
  if (consumed_) throw GraphError("graph already consumed by backward");
  Node node;
  node.value = std::move(value);
  node.vjp = std::move(vjp);
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    check_owned(p);
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

bool Graph::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

void Graph::check_owned(Var v) const {
  if (v.graph() != this || v.id() >= nodes_.size()) {
    throw GraphError("variable does not belong to this graph");
  }
}

Gradients Graph::backward(Var loss) {
  check_owned(loss);
  if (consumed_) throw GraphError("backward called twice on the same graph");
  const Tensor& loss_value = nodes_[loss.id()].value;
  if (loss_value.numel() != 1) {
    throw GraphError("backward requires a scalar loss, got shape " + to_string(loss_value.shape()));
  }
  consumed_ = true;

  const std::size_t n = loss.id() + 1;
  std::vector<char> reachable(n, 0);
  reachable[loss.id()] = 1;
  for (std::size_t id = n; id-- > 0;) {
    if (!reachable[id]) continue;
    for (std::size_t p : nodes_[id].parents) reachable[p] = 1;
  }

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id()] = Tensor(loss_value.shape(), 1.0);

  std::size_t visited = 0;
  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = n; id-- > 0;) {
    if (!reachable[id]) continue;
    ++visited;
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.vjp || !grads[id]) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t p : node.parents) {
      in_values.push_back(&nodes_[p].value);
      if (nodes_[p].requires_grad) {
        if (!grads[p]) grads[p] = Tensor::zeros_like(nodes_[p].value);
        in_grads.push_back(&*grads[p]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.vjp(BackwardContext{node.value, *grads[id], in_values, in_grads});
  }

  Gradients out;
  out.graph_ = this;
  out.visited_ = visited;
  out.grads_.resize(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].differentiable_leaf) continue;
    out.grads_[id] = grads[id] ? std::move(*grads[id]) : Tensor::zeros_like(nodes_[id].value);
  }
  return out;
}

}  // namespace triaug::diff
