// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/layers.h"

#include <cmath>
#include <random>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_inputs(const std::string& name, std::span<const Var> inputs, size_t n) {
  if (inputs.size() != n) {
    throw ShapeError(name + ": expected " + std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
  }
}

}  // namespace

Tensor he_uniform(const Shape& shape, int64_t fan_in, uint64_t seed) {
  Tensor t(shape);
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<int64_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

std::string layer_kind(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const Conv2dSpec&) { return std::string("conv2d"); },
                        [](const BatchNormSpec&) { return std::string("batch_norm"); },
                        [](const ReluSpec&) { return std::string("relu"); },
                        [](const SigmoidSpec&) { return std::string("sigmoid"); },
                        [](const FullyConnectedSpec&) { return std::string("fully_connected"); },
                        [](const GlobalAvgPoolSpec&) { return std::string("global_avg_pool"); },
                        [](const BilinearUpsampleSpec&) { return std::string("bilinear_upsample"); },
                        [](const ChannelConcatSpec&) { return std::string("channel_concat"); },
                        [](const ElementAddSpec&) { return std::string("element_add"); },
                        [](const ElementMulSpec&) { return std::string("element_mul"); },
                        [](const MaxPoolSpec&) { return std::string("max_pool"); },
                    },
                    spec);
}

Layer::Layer(std::string name, LayerSpec spec, ParameterSet& params, uint64_t seed)
    : name_(std::move(name)), spec_(spec) {
  auto seed_for = [&](const std::string& path) { return seed ^ fnv1a(path); };
  std::visit(Overloaded{
                 [&](const Conv2dSpec& s) {
                   if (s.in_ch <= 0 || s.out_ch <= 0 || s.kernel <= 0 || s.stride < 1 || s.dilation < 1) {
                     throw ConfigError(name_ + ": invalid conv2d spec");
                   }
                   const std::string w = name_ + "/weight";
                   weight_ = params.add(w, he_uniform({s.out_ch, s.in_ch, s.kernel, s.kernel},
                                                      s.in_ch * s.kernel * s.kernel, seed_for(w)));
                   if (s.bias) bias_ = params.add(name_ + "/bias", Tensor({s.out_ch}));
                 },
                 [&](const BatchNormSpec& s) {
                   if (s.channels <= 0) throw ConfigError(name_ + ": invalid batch_norm channels");
                   weight_ = params.add(name_ + "/weight", Tensor({s.channels}, 1.0));
                   bias_ = params.add(name_ + "/bias", Tensor({s.channels}));
                   running_mean_ = params.add_buffer(name_ + "/running_mean", Tensor({s.channels}));
                   running_var_ = params.add_buffer(name_ + "/running_var", Tensor({s.channels}, 1.0));
                 },
                 [&](const FullyConnectedSpec& s) {
                   if (s.in <= 0 || s.out <= 0) throw ConfigError(name_ + ": invalid fully_connected spec");
                   const std::string w = name_ + "/weight";
                   weight_ = params.add(w, he_uniform({s.out, s.in}, s.in, seed_for(w)));
                   if (s.bias) bias_ = params.add(name_ + "/bias", Tensor({s.out}));
                 },
                 [](const auto&) {},
             },
             spec_);
}

Var Layer::forward(std::span<const Var> inputs, const ForwardContext& ctx) const {
  try {
    return std::visit(
        Overloaded{
            [&](const Conv2dSpec& s) {
              require_inputs(name_, inputs, 1);
              return conv2d(inputs[0], weight_, bias_, {s.stride, s.padding, s.dilation});
            },
            [&](const BatchNormSpec& s) {
              require_inputs(name_, inputs, 1);
              BatchNormOptions opt{ctx.training, ctx.training && ctx.update_running_stats, s.momentum, s.eps};
              return batch_norm(inputs[0], weight_, bias_, *running_mean_, *running_var_, opt);
            },
            [&](const ReluSpec&) {
              require_inputs(name_, inputs, 1);
              return relu(inputs[0]);
            },
            [&](const SigmoidSpec&) {
              require_inputs(name_, inputs, 1);
              return sigmoid(inputs[0]);
            },
            [&](const FullyConnectedSpec&) {
              require_inputs(name_, inputs, 1);
              return linear(inputs[0], weight_, bias_);
            },
            [&](const GlobalAvgPoolSpec&) {
              require_inputs(name_, inputs, 1);
              return global_avg_pool(inputs[0]);
            },
            [&](const BilinearUpsampleSpec& s) {
              require_inputs(name_, inputs, 1);
              const Shape& xs = inputs[0].shape();
              if (xs.size() != 4) throw ShapeError("expected N×C×H×W, got " + shape_str(xs));
              return upsample_bilinear(inputs[0], xs[2] * s.factor, xs[3] * s.factor);
            },
            [&](const ChannelConcatSpec&) { return concat_channels(inputs); },
            [&](const ElementAddSpec&) {
              require_inputs(name_, inputs, 2);
              return add(inputs[0], inputs[1]);
            },
            [&](const ElementMulSpec&) {
              require_inputs(name_, inputs, 2);
              return mul(inputs[0], inputs[1]);
            },
            [&](const MaxPoolSpec& s) {
              require_inputs(name_, inputs, 1);
              return max_pool2d(inputs[0], s.kernel, s.stride, s.padding);
            },
        },
        spec_);
  } catch (const ShapeError& e) {
    throw ShapeError("layer '" + name_ + "' (" + layer_kind(spec_) + "): " + e.what());
  }
}

}  // namespace clpolyp::netcore
