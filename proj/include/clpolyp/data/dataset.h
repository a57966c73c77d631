// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clpolyp/netcore/tensor.h"

namespace clpolyp::data {

struct Size2 {
  int64_t height = 0;
  int64_t width = 0;
  friend bool operator==(const Size2&, const Size2&) = default;
};

/// Interleaved RGB image, row-major H×W×3.
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int64_t h, int64_t w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<size_t>(h * w * 3), fill) {}

  float& at(int64_t r, int64_t c, int ch) { return pixels[static_cast<size_t>((r * width + c) * 3 + ch)]; }
  float at(int64_t r, int64_t c, int ch) const { return pixels[static_cast<size_t>((r * width + c) * 3 + ch)]; }
  Size2 size() const { return {height, width}; }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary mask, row-major H×W with values in {0, 1}.
struct Mask {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> values;

  Mask() = default;
  Mask(int64_t h, int64_t w, uint8_t fill = 0) : height(h), width(w), values(static_cast<size_t>(h * w), fill) {}

  uint8_t& at(int64_t r, int64_t c) { return values[static_cast<size_t>(r * width + c)]; }
  uint8_t at(int64_t r, int64_t c) const { return values[static_cast<size_t>(r * width + c)]; }
  Size2 size() const { return {height, width}; }
  bool is_binary() const;
  int64_t foreground() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

struct ImageSample {
  std::string id;
  Image image;
  Mask mask;

  /// Throws ValidationError unless sizes match, are positive, and the mask is binary.
  void validate() const;
};

/// 8-bit mask value to {0, 1}: values >= 128 are foreground.
constexpr uint8_t binarize(uint8_t v) { return v >= 128 ? 1 : 0; }

/// Bilinear resize with half-pixel centres (same convention as the network upsampler).
Image resize_bilinear(const Image& img, Size2 size);
/// Nearest-neighbour resize; keeps masks binary.
Mask resize_nearest(const Mask& mask, Size2 size);

/// Decodes an 8-bit image/mask pair, resizes to `target` and binarizes the mask.
/// Unreadable files raise IoError naming the path; differing native sizes raise ValidationError.
ImageSample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& mask_path, Size2 target);

/// Writes an image (values clamped to [0,1]) or a mask (0/1 -> 0/255) as PNG.
void save_image(const std::filesystem::path& path, const Image& img);
void save_mask(const std::filesystem::path& path, const Mask& mask);

/// Batch of images -> N×3×H×W tensor; masks -> N×1×H×W.
netcore::Tensor images_to_tensor(std::span<const Image> images);
netcore::Tensor masks_to_tensor(std::span<const Mask> masks);

}  // namespace clpolyp::data
