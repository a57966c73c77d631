// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/augment/augment.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "clpolyp/errors.h"

namespace clpolyp::augment {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using data::Image;
using data::Mask;
using data::Size2;

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

bool fires(std::mt19937_64& rng, double p) {
  // Always draw so later ops see the same stream whatever p is.
  const double u = uniform(rng, 0.0, 1.0);
  return u < p;
}

void check_probability(const std::string& op, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(op + ": probability must be in [0,1]");
}

Image crop_image(const Image& img, const CropParams& c) {
  Image out(c.height, c.width);
  for (int64_t r = 0; r < c.height; ++r)
    for (int64_t x = 0; x < c.width; ++x)
      for (int ch = 0; ch < 3; ++ch) out.at(r, x, ch) = img.at(c.top + r, c.left + x, ch);
  return out;
}

Mask crop_mask(const Mask& m, const CropParams& c) {
  Mask out(c.height, c.width);
  for (int64_t r = 0; r < c.height; ++r)
    for (int64_t x = 0; x < c.width; ++x) out.at(r, x) = m.at(c.top + r, c.left + x);
  return out;
}

// Source coordinate of output (r, c) under a counter-clockwise quarter-turn count k.
template <class Get, class Set>
void rotate_generic(int64_t h, int64_t w, int k, Get get, Set set) {
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      switch (k) {
        case 1:  // out is w×h
          set(w - 1 - c, r, get(r, c));
          break;
        case 2:
          set(h - 1 - r, w - 1 - c, get(r, c));
          break;
        case 3:
          set(c, h - 1 - r, get(r, c));
          break;
        default:
          set(r, c, get(r, c));
      }
    }
  }
}

Image rotate_image(const Image& img, int k) {
  if (k == 0) return img;
  Image out = k % 2 ? Image(img.width, img.height) : Image(img.height, img.width);
  for (int ch = 0; ch < 3; ++ch) {
    rotate_generic(
        img.height, img.width, k, [&](int64_t r, int64_t c) { return img.at(r, c, ch); },
        [&](int64_t r, int64_t c, float v) { out.at(r, c, ch) = v; });
  }
  return out;
}

Mask rotate_mask(const Mask& m, int k) {
  if (k == 0) return m;
  Mask out = k % 2 ? Mask(m.width, m.height) : Mask(m.height, m.width);
  rotate_generic(
      m.height, m.width, k, [&](int64_t r, int64_t c) { return m.at(r, c); },
      [&](int64_t r, int64_t c, uint8_t v) { out.at(r, c) = v; });
  return out;
}

template <class T, class At>
T flip(const T& in, bool horizontal, At at) {
  T out = in;
  for (int64_t r = 0; r < in.height; ++r)
    for (int64_t c = 0; c < in.width; ++c) {
      const int64_t sr = horizontal ? r : in.height - 1 - r;
      const int64_t sc = horizontal ? in.width - 1 - c : c;
      at(out, in, r, c, sr, sc);
    }
  return out;
}

Image flip_image(const Image& img, bool horizontal) {
  return flip(img, horizontal, [](Image& o, const Image& i, int64_t r, int64_t c, int64_t sr, int64_t sc) {
    for (int ch = 0; ch < 3; ++ch) o.at(r, c, ch) = i.at(sr, sc, ch);
  });
}

Mask flip_mask(const Mask& m, bool horizontal) {
  return flip(m, horizontal,
              [](Mask& o, const Mask& i, int64_t r, int64_t c, int64_t sr, int64_t sc) { o.at(r, c) = i.at(sr, sc); });
}

int64_t reflect(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

Image blur_image(const Image& img, int kernel, double sigma) {
  const int half = kernel / 2;
  std::vector<double> taps(static_cast<size_t>(kernel));
  double total = 0.0;
  for (int i = 0; i < kernel; ++i) {
    const double d = i - half;
    taps[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[static_cast<size_t>(i)];
  }
  for (double& t : taps) t /= total;
  Image tmp(img.height, img.width), out(img.height, img.width);
  for (int64_t r = 0; r < img.height; ++r)
    for (int64_t c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < kernel; ++i) acc += taps[static_cast<size_t>(i)] * img.at(r, reflect(c + i - half, img.width), ch);
        tmp.at(r, c, ch) = static_cast<float>(acc);
      }
  for (int64_t r = 0; r < img.height; ++r)
    for (int64_t c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < kernel; ++i) acc += taps[static_cast<size_t>(i)] * tmp.at(reflect(r + i - half, img.height), c, ch);
        out.at(r, c, ch) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

std::string op_name(const Op& op) {
  return std::visit(Overloaded{
                        [](const RandomResizeCrop&) { return std::string("random_resize_crop"); },
                        [](const Rotate90s&) { return std::string("rotate90s"); },
                        [](const HFlip&) { return std::string("hflip"); },
                        [](const VFlip&) { return std::string("vflip"); },
                        [](const GaussianBlur&) { return std::string("gaussian_blur"); },
                        [](const GaussianNoise&) { return std::string("gaussian_noise"); },
                        [](const ToGray&) { return std::string("to_gray"); },
                        [](const BrightnessContrast&) { return std::string("brightness_contrast"); },
                        [](const GridDropout&) { return std::string("grid_dropout"); },
                        [](const Normalize&) { return std::string("normalize"); },
                    },
                    op);
}

bool is_geometric(const Op& op) {
  return std::holds_alternative<RandomResizeCrop>(op) || std::holds_alternative<Rotate90s>(op) ||
         std::holds_alternative<HFlip>(op) || std::holds_alternative<VFlip>(op);
}

void AugmentSpec::validate() const {
  for (size_t i = 0; i < ops.size(); ++i) {
    const std::string name = op_name(ops[i]);
    std::visit(Overloaded{
                   [&](const RandomResizeCrop& o) {
                     if (!(o.scale_lo > 0.0 && o.scale_lo <= o.scale_hi && o.scale_hi <= 1.0)) {
                       throw ConfigError(name + ": crop scale range must lie in (0,1] with lo <= hi");
                     }
                     check_probability(name, o.p);
                   },
                   [&](const GaussianBlur& o) {
                     if (o.kernel < 1 || o.kernel % 2 == 0) throw ConfigError(name + ": kernel must be odd and positive");
                     if (!(o.sigma_lo > 0.0 && o.sigma_lo <= o.sigma_hi)) throw ConfigError(name + ": bad sigma range");
                     check_probability(name, o.p);
                   },
                   [&](const GaussianNoise& o) {
                     if (!(o.stddev >= 0.0)) throw ConfigError(name + ": stddev must be non-negative");
                     check_probability(name, o.p);
                   },
                   [&](const BrightnessContrast& o) {
                     if (!(o.limit >= 0.0 && o.limit < 1.0)) throw ConfigError(name + ": limit must be in [0,1)");
                     check_probability(name, o.p);
                   },
                   [&](const GridDropout& o) {
                     if (!(o.ratio > 0.0 && o.ratio < 1.0)) throw ConfigError(name + ": ratio must be in (0,1)");
                     check_probability(name, o.p);
                   },
                   [&](const Normalize& o) {
                     if (i + 1 != ops.size()) throw ConfigError("normalize must be the last op");
                     for (double s : o.stddev)
                       if (!(s > 0.0)) throw ConfigError(name + ": stddev must be positive");
                   },
                   [&](const auto& o) { check_probability(name, o.p); },
               },
               ops[i]);
  }
}

Record sample(const AugmentSpec& spec, Size2 input, uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Record rec;
  Size2 size = input;
  for (const Op& op : spec.ops) {
    OpRecord r;
    std::visit(Overloaded{
                   [&](const RandomResizeCrop& o) {
                     r.applied = fires(rng, o.p);
                     const double area = uniform(rng, o.scale_lo, o.scale_hi) * static_cast<double>(size.height * size.width);
                     const double aspect = std::exp(uniform(rng, std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
                     CropParams c;
                     c.height = std::clamp<int64_t>(std::llround(std::sqrt(area / aspect)), 1, size.height);
                     c.width = std::clamp<int64_t>(std::llround(std::sqrt(area * aspect)), 1, size.width);
                     c.top = std::uniform_int_distribution<int64_t>(0, size.height - c.height)(rng);
                     c.left = std::uniform_int_distribution<int64_t>(0, size.width - c.width)(rng);
                     r.params = c;
                   },
                   [&](const Rotate90s& o) {
                     r.applied = fires(rng, o.p);
                     const int k = std::uniform_int_distribution<int>(0, 3)(rng);
                     r.params = RotateParams{k};
                     if (r.applied && k % 2) std::swap(size.height, size.width);
                   },
                   [&](const HFlip& o) {
                     r.applied = fires(rng, o.p);
                     r.params = FlipParams{};
                   },
                   [&](const VFlip& o) {
                     r.applied = fires(rng, o.p);
                     r.params = FlipParams{};
                   },
                   [&](const GaussianBlur& o) {
                     r.applied = fires(rng, o.p);
                     r.params = BlurParams{uniform(rng, o.sigma_lo, o.sigma_hi)};
                   },
                   [&](const GaussianNoise& o) {
                     r.applied = fires(rng, o.p);
                     r.params = NoiseParams{rng()};
                   },
                   [&](const ToGray& o) {
                     r.applied = fires(rng, o.p);
                     r.params = GrayParams{};
                   },
                   [&](const BrightnessContrast& o) {
                     r.applied = fires(rng, o.p);
                     const double contrast = 1.0 + uniform(rng, -o.limit, o.limit);
                     const double brightness = uniform(rng, -o.limit, o.limit);
                     r.params = BrightnessContrastParams{contrast, brightness};
                   },
                   [&](const GridDropout& o) {
                     r.applied = fires(rng, o.p);
                     const int64_t side = std::min(size.height, size.width);
                     const int64_t lo = std::max<int64_t>(2, side / 10), hi = std::max<int64_t>(lo, side / 5);
                     GridParams g;
                     g.unit = std::uniform_int_distribution<int64_t>(lo, hi)(rng);
                     g.hole = std::max<int64_t>(1, std::llround(static_cast<double>(g.unit) * o.ratio));
                     g.shift_y = std::uniform_int_distribution<int64_t>(0, g.unit - 1)(rng);
                     g.shift_x = std::uniform_int_distribution<int64_t>(0, g.unit - 1)(rng);
                     r.params = g;
                   },
                   [&](const Normalize&) {
                     r.applied = true;
                     r.params = NormalizeParams{};
                   },
               },
               op);
    rec.ops.push_back(r);
  }
  return rec;
}

Augmented replay(const AugmentSpec& spec, const Record& record, const Image& image, const std::optional<Mask>& mask) {
  if (record.ops.size() != spec.ops.size()) throw ValidationError("augment record does not match spec length");
  const bool joint = spec.mode == Mode::joint;
  if (joint && !mask) throw ValidationError("joint augmentation requires a mask");
  if (joint && mask->size() != image.size()) throw ValidationError("augment: image and mask sizes differ");
  Augmented out{image, joint ? mask : std::nullopt, record};
  for (size_t i = 0; i < spec.ops.size(); ++i) {
    const OpRecord& r = record.ops[i];
    if (!r.applied) continue;
    Image& img = out.image;
    std::visit(Overloaded{
                   [&](const RandomResizeCrop&) {
                     const auto& c = std::get<CropParams>(r.params);
                     const Size2 keep = img.size();
                     if (c.top + c.height > keep.height || c.left + c.width > keep.width) {
                       throw ValidationError("augment: crop record exceeds image bounds");
                     }
                     img = data::resize_bilinear(crop_image(img, c), keep);
                     if (out.mask) out.mask = data::resize_nearest(crop_mask(*out.mask, c), keep);
                   },
                   [&](const Rotate90s&) {
                     const int k = std::get<RotateParams>(r.params).quarter_turns;
                     img = rotate_image(img, k);
                     if (out.mask) out.mask = rotate_mask(*out.mask, k);
                   },
                   [&](const HFlip&) {
                     img = flip_image(img, true);
                     if (out.mask) out.mask = flip_mask(*out.mask, true);
                   },
                   [&](const VFlip&) {
                     img = flip_image(img, false);
                     if (out.mask) out.mask = flip_mask(*out.mask, false);
                   },
                   [&](const GaussianBlur& o) { img = blur_image(img, o.kernel, std::get<BlurParams>(r.params).sigma); },
                   [&](const GaussianNoise& o) {
                     std::mt19937_64 noise_rng(std::get<NoiseParams>(r.params).noise_seed);
                     std::normal_distribution<double> n(0.0, 1.0);
                     for (float& v : img.pixels) {
                       v = static_cast<float>(std::clamp(static_cast<double>(v) + o.stddev * n(noise_rng), 0.0, 1.0));
                     }
                   },
                   [&](const ToGray&) {
                     for (int64_t y = 0; y < img.height; ++y)
                       for (int64_t x = 0; x < img.width; ++x) {
                         const float g = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
                         for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = g;
                       }
                   },
                   [&](const BrightnessContrast&) {
                     const auto& bc = std::get<BrightnessContrastParams>(r.params);
                     for (float& v : img.pixels) {
                       v = static_cast<float>(std::clamp(bc.contrast * v + bc.brightness, 0.0, 1.0));
                     }
                   },
                   [&](const GridDropout&) {
                     const auto& g = std::get<GridParams>(r.params);
                     for (int64_t y = 0; y < img.height; ++y) {
                       if ((y + g.shift_y) % g.unit >= g.hole) continue;
                       for (int64_t x = 0; x < img.width; ++x) {
                         if ((x + g.shift_x) % g.unit >= g.hole) continue;
                         for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = 0.0f;
                       }
                     }
                   },
                   [&](const Normalize& o) { img = normalize_image(img, o); },
               },
               spec.ops[i]);
  }
  return out;
}

Augmented apply(const AugmentSpec& spec, const data::ImageSample& s, uint64_t seed) {
  const Record rec = sample(spec, s.image.size(), seed);
  return replay(spec, rec, s.image, spec.mode == Mode::joint ? std::optional<Mask>(s.mask) : std::nullopt);
}

Augmented apply(const AugmentSpec& spec, const Image& image, uint64_t seed) {
  if (spec.mode == Mode::joint) throw ValidationError("joint augmentation requires a mask");
  return replay(spec, sample(spec, image.size(), seed), image, std::nullopt);
}

Mask transform_mask(const AugmentSpec& spec, const Record& record, const Mask& mask) {
  AugmentSpec geometric{{}, Mode::joint};
  Record geo_record;
  for (size_t i = 0; i < spec.ops.size(); ++i) {
    if (!is_geometric(spec.ops[i])) continue;
    geometric.ops.push_back(spec.ops[i]);
    geo_record.ops.push_back(record.ops.at(i));
  }
  Image blank(mask.height, mask.width);
  return *replay(geometric, geo_record, blank, mask).mask;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"base",    "base_blur",    "base_gray",        "base_bc",
                                              "base_blur_bc", "base_blur_crop06", "base_blur_grid"};
  return names;
}

AugmentSpec preset(const std::string& name, Mode mode) {
  if (std::find(preset_names().begin(), preset_names().end(), name) == preset_names().end()) {
    throw ConfigError("unknown augmentation preset '" + name + "'");
  }
  const bool blur = name.find("blur") != std::string::npos;
  AugmentSpec spec;
  spec.mode = mode;
  spec.ops.push_back(RandomResizeCrop{name == "base_blur_crop06" ? 0.6 : 0.8, 1.0, 1.0});
  spec.ops.push_back(Rotate90s{});
  spec.ops.push_back(VFlip{});
  if (blur) spec.ops.push_back(GaussianBlur{});
  if (name == "base_gray") spec.ops.push_back(ToGray{});
  if (name == "base_bc" || name == "base_blur_bc") spec.ops.push_back(BrightnessContrast{0.2});
  if (name == "base_blur_grid") spec.ops.push_back(GridDropout{0.5});
  spec.ops.push_back(Normalize{});
  return spec;
}

Image normalize_image(const Image& image, const Normalize& norm) {
  Image out = image;
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    const size_t ch = i % 3;
    out.pixels[i] = static_cast<float>((out.pixels[i] - norm.mean[ch]) / norm.stddev[ch]);
  }
  return out;
}

}  // namespace clpolyp::augment
