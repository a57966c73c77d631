// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <vector>

#include "clpolyp/model/blocks.h"
#include "clpolyp/model/network_spec.h"

namespace clpolyp::model {

/// fc → batch_norm → relu → fc → L2 normalization.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(int64_t in, int64_t hidden, int64_t out, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& pooled, const ForwardContext& ctx) const;

 private:
  Layer fc1_, bn_, fc2_;
};

/// Parallel 1×1, three dilated 3×3 and an image-pool branch, concatenated and
/// projected by a 1×1 conv.
class Aspp {
 public:
  Aspp() = default;
  Aspp(const std::string& prefix, int64_t in, int64_t out, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& x, const ForwardContext& ctx) const;

  static constexpr int64_t kRates[3] = {6, 12, 18};

 private:
  std::vector<ConvBn> branches_;
  ConvBn pool_conv_, project_;
};

/// High-level context module. With `use_maspp` it runs ASPP beside a plain
/// 3×3 branch and merges them with concat → 1×1 → SE; otherwise plain ASPP.
class ContextModule {
 public:
  ContextModule() = default;
  ContextModule(const NetworkSpec& spec, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& f5, const ForwardContext& ctx) const;
  const SqueezeExcite* se() const { return use_maspp_ ? &se_ : nullptr; }

 private:
  bool use_maspp_ = true;
  Aspp aspp_;
  ConvBn plain_, merge_;
  SqueezeExcite se_;
};

/// Skip fusion at stride 4. With `use_ca`: A(f2) + conv3×3(cat(B(f2), z)),
/// A and B being 1×1 convs; otherwise 1×1 skip, concat, two 3×3 convs.
class SkipFusion {
 public:
  SkipFusion() = default;
  SkipFusion(const NetworkSpec& spec, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& f2, const Var& z, const ForwardContext& ctx) const;

 private:
  bool use_ca_ = true;
  Layer a_, b_;
  ConvBn fuse_;
  ConvBn skip_, refine1_, refine2_;
};

/// Upsample ×4, skip fusion, 1×1 output conv, upsample to input size.
/// The output conv runs before the final upsample; the two commute exactly in
/// real arithmetic and this keeps the full-resolution tensor single-channel.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetworkSpec& spec, ParameterSet& params, uint64_t seed);
  Var operator()(const Var& fused, const Var& f2, const ForwardContext& ctx) const;
  const SkipFusion& fusion() const { return fusion_; }

 private:
  int64_t out_h_ = 0, out_w_ = 0;
  SkipFusion fusion_;
  Layer outconv_;
};

}  // namespace clpolyp::model
