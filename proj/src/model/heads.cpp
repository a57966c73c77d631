// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/model/heads.h"

#include "clpolyp/errors.h"

namespace clpolyp::model {

using namespace netcore;

ProjectionHead::ProjectionHead(int64_t in, int64_t hidden, int64_t out, ParameterSet& params, uint64_t seed)
    : fc1_("fc1", FullyConnectedSpec{in, hidden, false}, params, seed),
      bn_("bn", BatchNormSpec{hidden}, params, seed),
      fc2_("fc2", FullyConnectedSpec{hidden, out}, params, seed) {}

Var ProjectionHead::operator()(const Var& pooled, const ForwardContext& ctx) const {
  return l2_normalize(fc2_(relu(bn_(fc1_(pooled, ctx), ctx)), ctx));
}

Aspp::Aspp(const std::string& prefix, int64_t in, int64_t out, ParameterSet& params, uint64_t seed) {
  branches_.emplace_back(prefix + "/b0/conv", prefix + "/b0/bn", in, out, 1, 1, 1, true, params, seed);
  for (int i = 0; i < 3; ++i) {
    const std::string p = prefix + "/b" + std::to_string(i + 1);
    branches_.emplace_back(p + "/conv", p + "/bn", in, out, 3, 1, kRates[i], true, params, seed);
  }
  pool_conv_ = ConvBn(prefix + "/pool/conv", prefix + "/pool/bn", in, out, 1, 1, 1, true, params, seed);
  project_ = ConvBn(prefix + "/project/conv", prefix + "/project/bn", 5 * out, out, 1, 1, 1, true, params, seed);
}

Var Aspp::operator()(const Var& x, const ForwardContext& ctx) const {
  std::vector<Var> parts;
  parts.reserve(5);
  for (const auto& b : branches_) parts.push_back(b(x, ctx));
  Var pooled = pool_conv_(global_avg_pool(x), ctx);
  parts.push_back(upsample_bilinear(pooled, x.shape()[2], x.shape()[3]));
  return project_(concat_channels(parts), ctx);
}

ContextModule::ContextModule(const NetworkSpec& spec, ParameterSet& params, uint64_t seed)
    : use_maspp_(spec.use_maspp) {
  const int64_t in = spec.high_level_channels(), c = spec.maspp_channels;
  aspp_ = Aspp("aspp", in, c, params, seed);
  if (!use_maspp_) return;
  plain_ = ConvBn("maspp/plain/conv", "maspp/plain/bn", in, c, 3, 1, 1, true, params, seed);
  merge_ = ConvBn("maspp/merge/conv", "maspp/merge/bn", 2 * c, c, 1, 1, 1, true, params, seed);
  se_ = SqueezeExcite("maspp/se", c, spec.se_reduction, params, seed);
}

Var ContextModule::operator()(const Var& f5, const ForwardContext& ctx) const {
  Var a = aspp_(f5, ctx);
  if (!use_maspp_) return a;
  const Var parts[] = {a, plain_(f5, ctx)};
  return se_(merge_(concat_channels(parts), ctx), ctx);
}

SkipFusion::SkipFusion(const NetworkSpec& spec, ParameterSet& params, uint64_t seed) : use_ca_(spec.use_ca) {
  const int64_t low = spec.low_level_channels(), dec = spec.decoder_channels(), skip = spec.skip_channels();
  const int64_t z = spec.maspp_channels;
  if (use_ca_) {
    a_ = Layer("ca/a", Conv2dSpec{low, dec, 1}, params, seed);
    b_ = Layer("ca/b", Conv2dSpec{low, skip, 1}, params, seed);
    fuse_ = ConvBn("ca/fuse/conv", "ca/fuse/bn", skip + z, dec, 3, 1, 1, true, params, seed);
  } else {
    skip_ = ConvBn("skip/conv", "skip/bn", low, skip, 1, 1, 1, true, params, seed);
    refine1_ = ConvBn("refine1/conv", "refine1/bn", skip + z, dec, 3, 1, 1, true, params, seed);
    refine2_ = ConvBn("refine2/conv", "refine2/bn", dec, dec, 3, 1, 1, true, params, seed);
  }
}

Var SkipFusion::operator()(const Var& f2, const Var& z, const ForwardContext& ctx) const {
  const Shape& fs = f2.shape();
  const Shape& zs = z.shape();
  if (fs.size() != 4 || zs.size() != 4 || fs[0] != zs[0] || fs[2] != zs[2] || fs[3] != zs[3]) {
    throw ShapeError("skip fusion: f2 " + shape_str(fs) + " vs z " + shape_str(zs));
  }
  if (use_ca_) {
    const Var parts[] = {b_(f2, ctx), z};
    return add(a_(f2, ctx), fuse_(concat_channels(parts), ctx));
  }
  const Var parts[] = {skip_(f2, ctx), z};
  return refine2_(refine1_(concat_channels(parts), ctx), ctx);
}

Decoder::Decoder(const NetworkSpec& spec, ParameterSet& params, uint64_t seed)
    : out_h_(spec.input_height),
      out_w_(spec.input_width),
      fusion_(spec, params, seed),
      outconv_("outconv", Conv2dSpec{spec.decoder_channels(), 1, 1}, params, seed) {}

Var Decoder::operator()(const Var& fused, const Var& f2, const ForwardContext& ctx) const {
  const Shape& s = fused.shape();
  if (s.size() != 4) throw ShapeError("decoder: expected N×C×H×W, got " + shape_str(s));
  Var z = upsample_bilinear(fused, s[2] * 4, s[3] * 4);
  Var logits = outconv_(fusion_(f2, z, ctx), ctx);
  return upsample_bilinear(logits, out_h_, out_w_);
}

}  // namespace clpolyp::model
