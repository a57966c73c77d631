// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clpolyp/data/dataset.h"

namespace clpolyp::data {

/// Ellipse in normalized coordinates (image spans [0,1] on both axes).
struct Blob {
  double cy = 0.5;
  double cx = 0.5;
  double ry = 0.1;
  double rx = 0.1;
};

/// Textured mucosa-like background with darker reddish elliptical lesions;
/// the mask is the union of the ellipses.
ImageSample make_synthetic_sample(std::string id, Size2 size, std::span<const Blob> blobs, uint64_t seed);

/// `n` samples cycling through the six count×size categories in the order
/// (one,small) (many,large) (one,medium) (many,medium) (one,large) (many,small).
std::vector<ImageSample> make_synthetic_dataset(int n, Size2 size, uint64_t seed);

/// Writes `<root>/images/<id>.png` and `<root>/masks/<id>.png`.
void write_sample(const std::filesystem::path& root, const ImageSample& sample);

}  // namespace clpolyp::data
