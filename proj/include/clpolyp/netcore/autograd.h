// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "clpolyp/netcore/tensor.h"

namespace clpolyp::netcore {

/// Gradient callback of a recorded op. `input_grads[i]` is null when input i
/// does not take gradients; otherwise the op accumulates into it.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

struct Node {
  Shape shape;
  std::string op;
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<std::shared_ptr<Node>> inputs;  // null where the input is a constant
  BackwardFn backward;
  Tensor grad;  // leaves keep it between passes, interior nodes drop it
};

/// Handle to a value in the computation graph.
///
/// The value buffer is owned by the handles and by whatever backward closures
/// saved it; the graph itself only links Nodes. Activations that no backward
/// rule needs are freed as soon as the forward code drops its handles.
class Var {
 public:
  Var() = default;
  /// Constant (no gradient).
  explicit Var(Tensor value);
  /// Leaf; with requires_grad the gradient accumulates in grad().
  static Var leaf(Tensor value, bool requires_grad);

  bool defined() const { return static_cast<bool>(value_); }
  const Tensor& value() const { return *value_; }
  Tensor& mutable_value() { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  std::shared_ptr<const Tensor> storage() const { return value_; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on);
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Accumulated gradient of a leaf (zeros if nothing flowed into it).
  const Tensor& grad() const;
  Tensor& mutable_grad();
  void zero_grad();

  /// Scalar value of a one-element tensor.
  double item() const;

  /// Reverse-mode sweep from this scalar. Consumes the recorded graph.
  void backward() const;

  /// Internal: builds the result of an op.
  static Var make(Tensor value, std::initializer_list<const Var*> inputs, BackwardFn fn,
                  const char* op);
  static Var make(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op);

 private:
  std::shared_ptr<Tensor> value_;
  std::shared_ptr<Node> node_;
};

/// True while graph recording is enabled on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace clpolyp::netcore
