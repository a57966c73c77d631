// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>

#include "clpolyp/netcore/ops.h"
#include "clpolyp/netcore/parameter_set.h"

namespace clpolyp::netcore {

struct Conv2dSpec {
  int64_t in_ch = 0;
  int64_t out_ch = 0;
  int64_t kernel = 1;
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t padding = 0;
  bool bias = true;
};
struct BatchNormSpec {
  int64_t channels = 0;
  double momentum = 0.1;
  double eps = 1e-5;
};
struct ReluSpec {};
struct SigmoidSpec {};
struct FullyConnectedSpec {
  int64_t in = 0;
  int64_t out = 0;
  bool bias = true;
};
struct GlobalAvgPoolSpec {};
struct BilinearUpsampleSpec {
  int64_t factor = 2;
};
struct ChannelConcatSpec {};
struct ElementAddSpec {};
struct ElementMulSpec {};
struct MaxPoolSpec {
  int64_t kernel = 3;
  int64_t stride = 2;
  int64_t padding = 1;
};

using LayerSpec = std::variant<Conv2dSpec, BatchNormSpec, ReluSpec, SigmoidSpec, FullyConnectedSpec,
                               GlobalAvgPoolSpec, BilinearUpsampleSpec, ChannelConcatSpec, ElementAddSpec,
                               ElementMulSpec, MaxPoolSpec>;

std::string layer_kind(const LayerSpec& spec);

/// 3×3 convolution padding that keeps the spatial size at stride 1.
inline int64_t same_padding(int64_t kernel, int64_t dilation) { return dilation * (kernel - 1) / 2; }

struct ForwardContext {
  bool training = true;
  /// Batch-norm running statistics are folded in only when training and this is set.
  bool update_running_stats = true;
};

/// A LayerSpec bound to its parameters inside a ParameterSet.
///
/// Parameters are registered as `<name>/weight`, `<name>/bias`, and for batch
/// norm `<name>/running_mean` / `<name>/running_var` buffers. Weights get
/// He-uniform init seeded from the parameter path; batch norm starts at
/// scale 1, shift 0.
class Layer {
 public:
  Layer() = default;
  Layer(std::string name, LayerSpec spec, ParameterSet& params, uint64_t seed = 0);

  const std::string& name() const { return name_; }
  const LayerSpec& spec() const { return spec_; }

  Var forward(std::span<const Var> inputs, const ForwardContext& ctx) const;
  Var operator()(const Var& x, const ForwardContext& ctx) const { return forward(std::span(&x, 1), ctx); }

 private:
  std::string name_;
  LayerSpec spec_;
  Var weight_;
  Var bias_;
  std::shared_ptr<Tensor> running_mean_;
  std::shared_ptr<Tensor> running_var_;
};

/// He-uniform tensor: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor he_uniform(const Shape& shape, int64_t fan_in, uint64_t seed);

}  // namespace clpolyp::netcore
