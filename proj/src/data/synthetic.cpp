// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/data/synthetic.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace clpolyp::data {

ImageSample make_synthetic_sample(std::string id, Size2 size, std::span<const Blob> blobs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 0.03);
  const double p1 = phase(rng), p2 = phase(rng);
  ImageSample s;
  s.id = std::move(id);
  s.image = Image(size.height, size.width);
  s.mask = Mask(size.height, size.width);
  for (int64_t r = 0; r < size.height; ++r) {
    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(size.height);
    for (int64_t c = 0; c < size.width; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(size.width);
      const double wave = 0.06 * std::sin(7.0 * x + p1) * std::cos(5.0 * y + p2);
      double rgb[3] = {0.82 + wave, 0.55 + wave, 0.45 + 0.5 * wave};
      double inside = 0.0;
      for (const Blob& b : blobs) {
        const double dy = (y - b.cy) / b.ry, dx = (x - b.cx) / b.rx;
        const double d2 = dy * dy + dx * dx;
        if (d2 <= 1.0) {
          s.mask.at(r, c) = 1;
          inside = std::max(inside, 1.0 - 0.35 * d2);
        }
      }
      if (inside > 0.0) {
        rgb[0] = 0.62 * inside + 0.1;
        rgb[1] = 0.22 * inside + 0.05;
        rgb[2] = 0.20 * inside + 0.05;
      }
      for (int ch = 0; ch < 3; ++ch) {
        s.image.at(r, c, ch) = static_cast<float>(std::clamp(rgb[ch] + noise(rng), 0.0, 1.0));
      }
    }
  }
  return s;
}

std::vector<ImageSample> make_synthetic_dataset(int n, Size2 size, uint64_t seed) {
  struct Category {
    int count;
    double area;
  };
  constexpr Category kCycle[6] = {{1, 0.025}, {2, 0.28}, {1, 0.09}, {2, 0.09}, {1, 0.28}, {2, 0.025}};
  std::vector<ImageSample> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const Category cat = kCycle[i % 6];
    std::vector<Blob> blobs;
    const double per_blob = cat.area / cat.count;
    for (int k = 0; k < cat.count; ++k) {
      const double aspect = 1.0 + 0.25 * unit(rng);
      const double r = std::sqrt(per_blob / std::numbers::pi);
      Blob b;
      b.ry = r * aspect;
      b.rx = r / aspect;
      // Multiple lesions sit in separate vertical strips so they never touch.
      const double lo = static_cast<double>(k) / cat.count, hi = static_cast<double>(k + 1) / cat.count;
      const double margin_x = b.rx + 0.02;
      b.cx = lo + margin_x + (hi - lo - 2.0 * margin_x) * unit(rng);
      b.cy = b.ry + 0.02 + (1.0 - 2.0 * (b.ry + 0.02)) * unit(rng);
      blobs.push_back(b);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%04d", i);
    out.push_back(make_synthetic_sample(id, size, blobs, seed * 7919 + static_cast<uint64_t>(i)));
  }
  return out;
}

void write_sample(const std::filesystem::path& root, const ImageSample& sample) {
  save_image(root / "images" / (sample.id + ".png"), sample.image);
  save_mask(root / "masks" / (sample.id + ".png"), sample.mask);
}

}  // namespace clpolyp::data
