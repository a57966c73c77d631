// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "clpolyp/netcore/autograd.h"

namespace clpolyp::netcore {

struct Parameter {
  Var var;  // leaf; gradient buffer lives in var.grad()
  bool trainable = true;
};

/// Named parameters plus non-trainable buffers (batch-norm running stats).
///
/// Iteration is sorted by name. Layers keep handles into the set, so values
/// must be overwritten in place (`Tensor::assign`) rather than replaced.
class ParameterSet {
 public:
  Var& add(const std::string& name, Tensor init, bool trainable = true);
  std::shared_ptr<Tensor> add_buffer(const std::string& name, Tensor init);

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Tensor& buffer(const std::string& name);
  const Tensor& buffer(const std::string& name) const;

  std::map<std::string, Parameter>& params() { return params_; }
  const std::map<std::string, Parameter>& params() const { return params_; }
  const std::map<std::string, std::shared_ptr<Tensor>>& buffers() const { return buffers_; }

  size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  int64_t element_count() const;
  std::vector<std::string> names() const;

  void zero_grad();
  /// Marks every parameter trainable or frozen (frozen ones never record gradients).
  void set_trainable(bool trainable);

  /// Copies values and buffers from a set with identical names and shapes.
  void copy_from(const ParameterSet& other);
  /// First name at which the two sets differ in name or shape; empty if identical.
  std::string first_structural_difference(const ParameterSet& other) const;

 private:
  std::map<std::string, Parameter> params_;
  std::map<std::string, std::shared_ptr<Tensor>> buffers_;
};

/// 64-bit FNV-1a, used to derive stable per-name seeds.
uint64_t fnv1a(std::string_view text);

}  // namespace clpolyp::netcore
