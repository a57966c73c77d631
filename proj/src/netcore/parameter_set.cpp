// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/parameter_set.h"

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

uint64_t fnv1a(std::string_view text) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Var& ParameterSet::add(const std::string& name, Tensor init, bool trainable) {
  if (params_.count(name) || buffers_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  Parameter p{Var::leaf(std::move(init), trainable), trainable};
  return params_.emplace(name, std::move(p)).first->second.var;
}

std::shared_ptr<Tensor> ParameterSet::add_buffer(const std::string& name, Tensor init) {
  if (params_.count(name) || buffers_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  auto ptr = std::make_shared<Tensor>(std::move(init));
  buffers_.emplace(name, ptr);
  return ptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("no parameter named " + name);
  return it->second;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("no parameter named " + name);
  return it->second;
}

Tensor& ParameterSet::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ValidationError("no buffer named " + name);
  return *it->second;
}

const Tensor& ParameterSet::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ValidationError("no buffer named " + name);
  return *it->second;
}

int64_t ParameterSet::element_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.var.value().numel();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& [name, p] : params_) p.var.zero_grad();
}

void ParameterSet::set_trainable(bool trainable) {
  for (auto& [name, p] : params_) {
    p.trainable = trainable;
    p.var.set_requires_grad(trainable);
  }
}

std::string ParameterSet::first_structural_difference(const ParameterSet& other) const {
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end() && b != other.params_.end(); ++a, ++b) {
    if (a->first != b->first) return a->first < b->first ? a->first : b->first;
    if (a->second.var.shape() != b->second.var.shape()) return a->first;
  }
  if (a != params_.end()) return a->first;
  if (b != other.params_.end()) return b->first;
  auto x = buffers_.begin();
  auto y = other.buffers_.begin();
  for (; x != buffers_.end() && y != other.buffers_.end(); ++x, ++y) {
    if (x->first != y->first) return x->first < y->first ? x->first : y->first;
    if (x->second->shape() != y->second->shape()) return x->first;
  }
  if (x != buffers_.end()) return x->first;
  if (y != other.buffers_.end()) return y->first;
  return {};
}

void ParameterSet::copy_from(const ParameterSet& other) {
  const std::string diff = first_structural_difference(other);
  if (!diff.empty()) throw ValidationError("parameter sets differ at " + diff);
  for (auto& [name, p] : params_) p.var.mutable_value().assign(other.params_.at(name).var.value());
  for (auto& [name, b] : buffers_) b->assign(*other.buffers_.at(name));
}

}  // namespace clpolyp::netcore
