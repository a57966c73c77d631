// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/autograd.h"

#include <unordered_set>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

namespace {

thread_local bool g_grad_enabled = true;

Tensor& ensure_grad(Node& node) {
  if (node.grad.shape() != node.shape) node.grad = Tensor(node.shape);
  return node.grad;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var::Var(Tensor value) : value_(std::make_shared<Tensor>(std::move(value))) {}

Var Var::leaf(Tensor value, bool requires_grad) {
  Var v(std::move(value));
  v.node_ = std::make_shared<Node>();
  v.node_->shape = v.value_->shape();
  v.node_->op = "leaf";
  v.node_->is_leaf = true;
  v.node_->requires_grad = requires_grad;
  v.node_->grad = Tensor(v.node_->shape);
  return v;
}

void Var::set_requires_grad(bool on) {
  if (!node_) {
    if (!on) return;
    *this = leaf(*value_, true);
    return;
  }
  if (!node_->is_leaf) throw ValidationError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}

const Tensor& Var::grad() const {
  if (!node_) throw ValidationError("grad() on a constant");
  return ensure_grad(*node_);
}

Tensor& Var::mutable_grad() {
  if (!node_) throw ValidationError("grad() on a constant");
  return ensure_grad(*node_);
}

void Var::zero_grad() {
  if (node_) ensure_grad(*node_).fill(0.0);
}

double Var::item() const {
  if (value_->numel() != 1) throw ShapeError("item() on tensor " + shape_str(value_->shape()));
  return (*value_)[0];
}

Var Var::make(Tensor value, std::initializer_list<const Var*> inputs, BackwardFn fn, const char* op) {
  std::vector<Var> copies;
  copies.reserve(inputs.size());
  for (const Var* v : inputs) copies.push_back(*v);
  return make(std::move(value), std::span<const Var>(copies), std::move(fn), op);
}

Var Var::make(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (!any) return out;
  out.node_ = std::make_shared<Node>();
  out.node_->shape = out.value_->shape();
  out.node_->op = op;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (const Var& v : inputs) out.node_->inputs.push_back(v.requires_grad() ? v.node_ : nullptr);
  out.node_->backward = std::move(fn);
  return out;
}

void Var::backward() const {
  if (!node_ || !node_->requires_grad) throw ValidationError("backward() on a value with no graph");
  if (value_->numel() != 1) throw ShapeError("backward() needs a scalar, got " + shape_str(shape()));

  // Post-order DFS gives inputs before consumers.
  // Holds ownership so releasing edges mid-sweep cannot free pending nodes.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<std::shared_ptr<Node>, size_t>> stack{{node_, 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      std::shared_ptr<Node> child = top.first->inputs[top.second++];
      if (child && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  ensure_grad(*node_).fill(1.0);
  std::vector<Tensor*> input_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (node->is_leaf) continue;
    if (node->backward && node->grad.shape() == node->shape) {
      input_grads.clear();
      for (const auto& in : node->inputs) input_grads.push_back(in ? &ensure_grad(*in) : nullptr);
      node->backward(node->grad, input_grads);
    }
    node->backward = nullptr;
    node->grad = Tensor();
    node->inputs.clear();
  }
}

}  // namespace clpolyp::netcore
