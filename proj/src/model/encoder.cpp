// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/model/encoder.h"

#include <algorithm>

#include "clpolyp/errors.h"
#include "clpolyp/netcore/checkpoint.h"

namespace clpolyp::model {

using namespace netcore;

namespace {

/// Basic residual block: conv3×3-bn-relu, conv3×3-bn, add, relu.
struct BasicBlock {
  ConvBn a, b;
  Var operator()(const Var& x, const ForwardContext& ctx) const { return relu(add(b(a(x, ctx), ctx), x)); }
};

/// Bottleneck with optional projection shortcut; stride on the 3×3 conv.
struct Bottleneck {
  ConvBn reduce, spatial, expand, shortcut;
  bool has_shortcut = false;
  Var operator()(const Var& x, const ForwardContext& ctx) const {
    Var y = expand(spatial(reduce(x, ctx), ctx), ctx);
    return relu(add(y, has_shortcut ? shortcut(x, ctx) : x));
  }
};

}  // namespace

struct Encoder::Impl {
  NetworkSpec spec;
  // tiny
  std::vector<ConvBn> downs;
  std::vector<BasicBlock> basics;
  // resnet50
  ConvBn stem;
  Layer maxpool;
  std::vector<std::vector<Bottleneck>> layers;

  EncoderFeatures run_tiny(const Var& x, const ForwardContext& ctx) const {
    EncoderFeatures f;
    Var h = x;
    for (size_t s = 0; s < downs.size(); ++s) {
      h = basics[s](downs[s](h, ctx), ctx);
      if (s == 1) f.f2 = h;
    }
    f.f5 = h;
    return f;
  }

  EncoderFeatures run_resnet(const Var& x, const ForwardContext& ctx) const {
    EncoderFeatures f;
    Var h = maxpool(stem(x, ctx), ctx);
    for (size_t l = 0; l < layers.size(); ++l) {
      for (const auto& block : layers[l]) h = block(h, ctx);
      if (l == 0) f.f2 = h;
    }
    f.f5 = h;
    return f;
  }
};

Encoder::Encoder(const NetworkSpec& spec, ParameterSet& params, uint64_t seed) : impl_(std::make_unique<Impl>()) {
  impl_->spec = spec;
  if (spec.backbone == Backbone::tiny) {
    const int64_t widths[] = {16, 32, 64, 128};
    int64_t in = 3;
    for (int s = 0; s < 4; ++s) {
      const std::string p = "stage" + std::to_string(s + 1);
      const int64_t w = widths[s];
      impl_->downs.emplace_back(p + "/down/conv", p + "/down/bn", in, w, 3, 2, 1, true, params, seed);
      impl_->basics.push_back({ConvBn(p + "/block/conv1", p + "/block/bn1", w, w, 3, 1, 1, true, params, seed),
                               ConvBn(p + "/block/conv2", p + "/block/bn2", w, w, 3, 1, 1, false, params, seed)});
      in = w;
    }
    return;
  }
  impl_->stem = ConvBn("conv1", "bn1", 3, 64, 7, 2, 1, true, params, seed);
  impl_->maxpool = Layer("maxpool", MaxPoolSpec{3, 2, 1}, params, seed);
  const int blocks[] = {3, 4, 6, 3};
  const int64_t widths[] = {64, 128, 256, 512};
  int64_t in = 64;
  for (int l = 0; l < 4; ++l) {
    const std::string lp = "layer" + std::to_string(l + 1);
    const int64_t w = widths[l], out = w * 4;
    // Last stage trades its stride for dilation to keep output stride 16.
    const int64_t stride = (l == 1 || l == 2) ? 2 : 1;
    std::vector<Bottleneck> stage;
    for (int b = 0; b < blocks[l]; ++b) {
      const std::string bp = lp + "/" + std::to_string(b);
      const int64_t s = b == 0 ? stride : 1;
      const int64_t dilation = (l == 3 && b > 0) ? 2 : 1;
      Bottleneck blk;
      blk.reduce = ConvBn(bp + "/conv1", bp + "/bn1", in, w, 1, 1, 1, true, params, seed);
      blk.spatial = ConvBn(bp + "/conv2", bp + "/bn2", w, w, 3, s, dilation, true, params, seed);
      blk.expand = ConvBn(bp + "/conv3", bp + "/bn3", w, out, 1, 1, 1, false, params, seed);
      if (b == 0) {
        blk.has_shortcut = true;
        blk.shortcut = ConvBn(bp + "/downsample/0", bp + "/downsample/1", in, out, 1, s, 1, false, params, seed);
      }
      stage.push_back(std::move(blk));
      in = out;
    }
    impl_->layers.push_back(std::move(stage));
  }
}

Encoder::~Encoder() = default;
Encoder::Encoder(Encoder&&) noexcept = default;
Encoder& Encoder::operator=(Encoder&&) noexcept = default;

EncoderFeatures Encoder::operator()(const Var& images, const ForwardContext& ctx) const {
  const NetworkSpec& s = impl_->spec;
  const Shape& xs = images.shape();
  if (xs.size() != 4 || xs[1] != 3 || xs[2] != s.input_height || xs[3] != s.input_width) {
    throw ShapeError("encoder: expected [Bx3x" + std::to_string(s.input_height) + "x" + std::to_string(s.input_width) +
                     "], got " + shape_str(xs));
  }
  EncoderFeatures f = s.backbone == Backbone::tiny ? impl_->run_tiny(images, ctx) : impl_->run_resnet(images, ctx);
  f.pooled = flatten(global_avg_pool(f.f5));
  return f;
}

size_t load_backbone_weights(ParameterSet& params, const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  size_t loaded = 0;
  for (const auto& [raw, tensor] : ckpt.tensors) {
    std::string name = raw;
    std::replace(name.begin(), name.end(), '.', '/');
    if (name.rfind("fc/", 0) == 0) continue;
    Tensor* dst = nullptr;
    if (params.contains(name)) {
      dst = &params.at(name).var.mutable_value();
    } else if (params.buffers().count(name)) {
      dst = &params.buffer(name);
    } else {
      continue;
    }
    if (dst->shape() != tensor.shape()) {
      throw ValidationError("backbone weights: '" + raw + "' has shape " + shape_str(tensor.shape()) + ", expected " +
                            shape_str(dst->shape()));
    }
    dst->assign(tensor);
    ++loaded;
  }
  return loaded;
}

}  // namespace clpolyp::model
