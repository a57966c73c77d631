// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "clpolyp/model/blocks.h"
#include "clpolyp/model/network_spec.h"

namespace clpolyp::model {

struct EncoderFeatures {
  Var f2;      // stride 4
  Var f5;      // stride 16
  Var pooled;  // B×C5
};

/// Residual backbone. Parameter names follow torchvision for the resnet50 preset
/// (`conv1`, `bn1`, `layer3/2/conv2`, `layer1/0/downsample/0`, ...).
class Encoder {
 public:
  Encoder(const NetworkSpec& spec, ParameterSet& params, uint64_t seed);
  ~Encoder();
  Encoder(Encoder&&) noexcept;
  Encoder& operator=(Encoder&&) noexcept;

  /// ShapeError unless `images` is B×3×H×W at the configured input size.
  EncoderFeatures operator()(const Var& images, const ForwardContext& ctx) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Copies tensors from a checkpoint container whose names use `.` or `/`
/// separators (`layer1.0.conv1.weight`). Unknown names and `fc.*` are skipped.
/// Returns the number of tensors loaded.
size_t load_backbone_weights(ParameterSet& params, const std::filesystem::path& path);

}  // namespace clpolyp::model
