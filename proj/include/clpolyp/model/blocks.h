// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <string>
#include <vector>

#include "clpolyp/netcore/layers.h"

namespace clpolyp::model {

using netcore::ForwardContext;
using netcore::Layer;
using netcore::ParameterSet;
using netcore::Var;

/// conv (no bias) → batch_norm → optional relu.
class ConvBn {
 public:
  ConvBn() = default;
  ConvBn(const std::string& conv_name, const std::string& bn_name, int64_t in, int64_t out, int64_t kernel,
         int64_t stride, int64_t dilation, bool relu, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& x, const ForwardContext& ctx) const;

 private:
  Layer conv_, bn_;
  bool relu_ = true;
};

/// Squeeze-and-excitation gate: x · sigmoid(fc(relu(fc(gap(x))))).
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(const std::string& name, int64_t channels, int64_t reduction, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& x, const ForwardContext& ctx) const;
  /// Per-channel gate values, N×C×1×1.
  Var gate(const Var& x, const ForwardContext& ctx) const;

 private:
  Layer squeeze_, excite_;
};

}  // namespace clpolyp::model
