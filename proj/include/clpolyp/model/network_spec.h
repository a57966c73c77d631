// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <string>

namespace clpolyp::model {

enum class Backbone { tiny, resnet50 };

Backbone parse_backbone(const std::string& text);
std::string to_string(Backbone b);

struct NetworkSpec {
  Backbone backbone = Backbone::tiny;
  int64_t input_height = 384;
  int64_t input_width = 384;
  int64_t low_level_stride = 4;
  int64_t high_level_stride = 16;
  int64_t maspp_channels = 64;
  int64_t projection_dim = 128;
  bool use_maspp = true;
  bool use_ca = true;
  bool use_cl_branch = true;
  double momentum = 0.999;
  int64_t se_reduction = 16;
  /// Optional backbone weight file (checkpoint container, torchvision-style names).
  std::string backbone_weights;

  static NetworkSpec tiny();
  static NetworkSpec resnet50();

  int64_t low_level_channels() const { return backbone == Backbone::resnet50 ? 256 : 32; }
  int64_t high_level_channels() const { return backbone == Backbone::resnet50 ? 2048 : 128; }
  int64_t decoder_channels() const { return backbone == Backbone::resnet50 ? 256 : 32; }
  /// Width of the skip projection concatenated with the upsampled feature.
  int64_t skip_channels() const { return backbone == Backbone::resnet50 ? 48 : 16; }

  /// ConfigError on non-divisible input sizes, bad widths or momentum outside [0,1].
  void validate() const;
};

}  // namespace clpolyp::model
