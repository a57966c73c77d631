// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/data/dataset.h"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "clpolyp/errors.h"

namespace clpolyp::data {

namespace {

struct Tap {
  int64_t lo, hi;
  float frac;
};

std::vector<Tap> bilinear_taps(int64_t in, int64_t out) {
  std::vector<Tap> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int64_t lo = std::min(static_cast<int64_t>(std::floor(src)), in - 1);
    taps[static_cast<size_t>(i)] = {lo, std::min(lo + 1, in - 1), static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

std::vector<int64_t> nearest_taps(int64_t in, int64_t out) {
  std::vector<int64_t> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    taps[static_cast<size_t>(i)] =
        std::min(static_cast<int64_t>(std::floor((static_cast<double>(i) + 0.5) * scale)), in - 1);
  }
  return taps;
}

}  // namespace

bool Mask::is_binary() const {
  return std::all_of(values.begin(), values.end(), [](uint8_t v) { return v <= 1; });
}

int64_t Mask::foreground() const { return std::count(values.begin(), values.end(), uint8_t{1}); }

void ImageSample::validate() const {
  if (image.height <= 0 || image.width <= 0) throw ValidationError(id + ": empty image");
  if (image.size() != mask.size()) {
    throw ValidationError(id + ": image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                          " vs mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  if (static_cast<int64_t>(image.pixels.size()) != image.height * image.width * 3 ||
      static_cast<int64_t>(mask.values.size()) != mask.height * mask.width) {
    throw ValidationError(id + ": buffer size does not match dimensions");
  }
  if (!mask.is_binary()) throw ValidationError(id + ": mask is not binary");
}

Image resize_bilinear(const Image& img, Size2 size) {
  if (size == img.size()) return img;
  Image out(size.height, size.width);
  const auto ty = bilinear_taps(img.height, size.height);
  const auto tx = bilinear_taps(img.width, size.width);
  for (int64_t r = 0; r < size.height; ++r) {
    const Tap& y = ty[static_cast<size_t>(r)];
    for (int64_t c = 0; c < size.width; ++c) {
      const Tap& x = tx[static_cast<size_t>(c)];
      for (int ch = 0; ch < 3; ++ch) {
        const float top = img.at(y.lo, x.lo, ch) * (1.0f - x.frac) + img.at(y.lo, x.hi, ch) * x.frac;
        const float bot = img.at(y.hi, x.lo, ch) * (1.0f - x.frac) + img.at(y.hi, x.hi, ch) * x.frac;
        out.at(r, c, ch) = top * (1.0f - y.frac) + bot * y.frac;
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, Size2 size) {
  if (size == mask.size()) return mask;
  Mask out(size.height, size.width);
  const auto ty = nearest_taps(mask.height, size.height);
  const auto tx = nearest_taps(mask.width, size.width);
  for (int64_t r = 0; r < size.height; ++r) {
    for (int64_t c = 0; c < size.width; ++c) out.at(r, c) = mask.at(ty[static_cast<size_t>(r)], tx[static_cast<size_t>(c)]);
  }
  return out;
}

ImageSample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& mask_path, Size2 target) {
  if (target.height <= 0 || target.width <= 0) throw ValidationError("load_sample: target size must be positive");
  const cv::Mat bgr = cv::imread(image_path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + image_path.string());
  const cv::Mat gray = cv::imread(mask_path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw IoError("cannot read mask: " + mask_path.string());
  if (bgr.rows != gray.rows || bgr.cols != gray.cols) {
    throw ValidationError("image " + image_path.string() + " is " + std::to_string(bgr.rows) + "x" +
                          std::to_string(bgr.cols) + " but mask " + mask_path.string() + " is " +
                          std::to_string(gray.rows) + "x" + std::to_string(gray.cols));
  }
  ImageSample s;
  s.id = image_path.stem().string();
  Image native(bgr.rows, bgr.cols);
  Mask native_mask(gray.rows, gray.cols);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    const auto* mrow = gray.ptr<uint8_t>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) native.at(r, c, ch) = static_cast<float>(row[c][2 - ch]) / 255.0f;
      native_mask.at(r, c) = mrow[c];
    }
  }
  s.image = resize_bilinear(native, target);
  s.mask = resize_nearest(native_mask, target);
  for (uint8_t& v : s.mask.values) v = binarize(v);
  return s;
}

void save_image(const std::filesystem::path& path, const Image& img) {
  cv::Mat out(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3);
  for (int64_t r = 0; r < img.height; ++r) {
    auto* row = out.ptr<cv::Vec3b>(static_cast<int>(r));
    for (int64_t c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = std::clamp(img.at(r, c, ch), 0.0f, 1.0f);
        row[c][2 - ch] = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write image: " + path.string());
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
  cv::Mat out(static_cast<int>(mask.height), static_cast<int>(mask.width), CV_8UC1);
  for (int64_t r = 0; r < mask.height; ++r) {
    auto* row = out.ptr<uint8_t>(static_cast<int>(r));
    for (int64_t c = 0; c < mask.width; ++c) row[c] = mask.at(r, c) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw IoError("cannot write mask: " + path.string());
}

netcore::Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ValidationError("images_to_tensor: empty batch");
  const int64_t h = images[0].height, w = images[0].width;
  netcore::Tensor t({static_cast<int64_t>(images.size()), 3, h, w});
  for (size_t n = 0; n < images.size(); ++n) {
    if (images[n].height != h || images[n].width != w) throw ValidationError("images_to_tensor: mixed sizes in batch");
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c)
        for (int ch = 0; ch < 3; ++ch) t.at(static_cast<int64_t>(n), ch, r, c) = images[n].at(r, c, ch);
  }
  return t;
}

netcore::Tensor masks_to_tensor(std::span<const Mask> masks) {
  if (masks.empty()) throw ValidationError("masks_to_tensor: empty batch");
  const int64_t h = masks[0].height, w = masks[0].width;
  netcore::Tensor t({static_cast<int64_t>(masks.size()), 1, h, w});
  for (size_t n = 0; n < masks.size(); ++n) {
    if (masks[n].height != h || masks[n].width != w) throw ValidationError("masks_to_tensor: mixed sizes in batch");
    for (int64_t i = 0; i < h * w; ++i) t[static_cast<int64_t>(n) * h * w + i] = masks[n].values[static_cast<size_t>(i)];
  }
  return t;
}

}  // namespace clpolyp::data
