// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clpolyp/data/dataset.h"

namespace clpolyp::augment {

// Geometric ops. Each fires with probability `p`.
struct RandomResizeCrop {
  double scale_lo = 0.8;
  double scale_hi = 1.0;
  double p = 1.0;
};
/// Rotation by k·90°, k uniform in {0,1,2,3}.
struct Rotate90s {
  double p = 1.0;
};
struct HFlip {
  double p = 0.5;
};
struct VFlip {
  double p = 0.5;
};

// Photometric ops; never touch the mask.
struct GaussianBlur {
  int kernel = 5;
  double sigma_lo = 0.1;
  double sigma_hi = 2.0;
  double p = 0.5;
};
struct GaussianNoise {
  double stddev = 0.03;
  double p = 0.5;
};
struct ToGray {
  double p = 0.5;
};
struct BrightnessContrast {
  double limit = 0.2;
  double p = 0.5;
};
/// Zeroes a regular grid of square holes; `ratio` is hole side / grid unit.
struct GridDropout {
  double ratio = 0.5;
  double p = 0.5;
};
struct Normalize {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.5, 0.5, 0.5};
};

using Op = std::variant<RandomResizeCrop, Rotate90s, HFlip, VFlip, GaussianBlur, GaussianNoise, ToGray,
                        BrightnessContrast, GridDropout, Normalize>;

std::string op_name(const Op& op);
bool is_geometric(const Op& op);

enum class Mode { joint, image_only };

struct AugmentSpec {
  std::vector<Op> ops;
  Mode mode = Mode::joint;

  /// ConfigError on bad parameters or a normalize that is not last.
  void validate() const;
};

// Sampled parameters, one record per op.
struct CropParams {
  int64_t top = 0, left = 0, height = 0, width = 0;
};
struct RotateParams {
  int quarter_turns = 0;
};
struct FlipParams {};
struct BlurParams {
  double sigma = 0.0;
};
struct NoiseParams {
  uint64_t noise_seed = 0;
};
struct GrayParams {};
struct BrightnessContrastParams {
  double contrast = 1.0;
  double brightness = 0.0;
};
struct GridParams {
  int64_t unit = 0, hole = 0, shift_y = 0, shift_x = 0;
};
struct NormalizeParams {};

using OpParams = std::variant<CropParams, RotateParams, FlipParams, BlurParams, NoiseParams, GrayParams,
                              BrightnessContrastParams, GridParams, NormalizeParams>;

struct OpRecord {
  bool applied = false;
  OpParams params;
};

/// Everything sampled by one application; enough to replay it exactly.
struct Record {
  std::vector<OpRecord> ops;
};

struct Augmented {
  data::Image image;
  std::optional<data::Mask> mask;
  Record record;
};

/// Draws the per-op parameters for an input of size `input`.
Record sample(const AugmentSpec& spec, data::Size2 input, uint64_t seed);

/// Executes `record` on an image (and mask, in joint mode).
Augmented replay(const AugmentSpec& spec, const Record& record, const data::Image& image,
                 const std::optional<data::Mask>& mask);

/// sample + replay. Joint mode requires a mask; image_only ignores it.
Augmented apply(const AugmentSpec& spec, const data::ImageSample& sample_in, uint64_t seed);
Augmented apply(const AugmentSpec& spec, const data::Image& image, uint64_t seed);

/// Mask under the geometric part of `record` only.
data::Mask transform_mask(const AugmentSpec& spec, const Record& record, const data::Mask& mask);

/// Preset names accepted by preset().
const std::vector<std::string>& preset_names();
inline constexpr const char* kDefaultPreset = "base_blur";

AugmentSpec preset(const std::string& name, Mode mode = Mode::joint);

/// Per-channel (x - mean) / stddev; the evaluation-time pipeline after resize.
data::Image normalize_image(const data::Image& image, const Normalize& norm = {});

}  // namespace clpolyp::augment
