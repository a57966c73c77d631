// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/model/blocks.h"

#include "clpolyp/errors.h"

namespace clpolyp::model {

using namespace netcore;

ConvBn::ConvBn(const std::string& conv_name, const std::string& bn_name, int64_t in, int64_t out, int64_t kernel,
               int64_t stride, int64_t dilation, bool relu, ParameterSet& params, uint64_t seed)
    : conv_(conv_name,
            Conv2dSpec{in, out, kernel, stride, dilation, kernel == 1 ? 0 : same_padding(kernel, dilation), false},
            params, seed),
      bn_(bn_name, BatchNormSpec{out}, params, seed),
      relu_(relu) {}

Var ConvBn::operator()(const Var& x, const ForwardContext& ctx) const {
  Var y = bn_(conv_(x, ctx), ctx);
  return relu_ ? netcore::relu(y) : y;
}

SqueezeExcite::SqueezeExcite(const std::string& name, int64_t channels, int64_t reduction, ParameterSet& params,
                             uint64_t seed) {
  if (reduction <= 0 || channels % reduction != 0) {
    throw ConfigError(name + ": channels " + std::to_string(channels) + " not divisible by SE reduction " +
                      std::to_string(reduction));
  }
  squeeze_ = Layer(name + "/fc1", FullyConnectedSpec{channels, channels / reduction}, params, seed);
  excite_ = Layer(name + "/fc2", FullyConnectedSpec{channels / reduction, channels}, params, seed);
}

Var SqueezeExcite::gate(const Var& x, const ForwardContext& ctx) const {
  const int64_t n = x.shape()[0], c = x.shape()[1];
  Var s = flatten(global_avg_pool(x));
  Var e = sigmoid(excite_(relu(squeeze_(s, ctx)), ctx));
  return reshape(e, {n, c, 1, 1});
}

Var SqueezeExcite::operator()(const Var& x, const ForwardContext& ctx) const { return mul(x, gate(x, ctx)); }

}  // namespace clpolyp::model
