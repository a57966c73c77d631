// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clpolyp/augment/augment.h"
#include "clpolyp/errors.h"

namespace clpolyp::augment {
namespace {

using data::Image;
using data::ImageSample;
using data::Mask;

ImageSample random_sample(std::mt19937_64& rng, int64_t h, int64_t w) {
  ImageSample s{"s", Image(h, w), Mask(h, w)};
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : s.image.pixels) v = u(rng);
  std::bernoulli_distribution on(0.3);
  for (auto& v : s.mask.values) v = on(rng) ? 1 : 0;
  return s;
}

// Image whose red channel is the mask, so geometry can be read back from pixels.
ImageSample mask_coded_sample(std::mt19937_64& rng, int64_t h, int64_t w) {
  ImageSample s = random_sample(rng, h, w);
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) s.image.at(r, c, 0) = s.mask.at(r, c);
  return s;
}

// Oracle: geometric transform of a mask from the record, implemented by
// explicit inverse coordinate maps.
Mask oracle_geometry(const AugmentSpec& spec, const Record& rec, Mask m) {
  for (size_t i = 0; i < spec.ops.size(); ++i) {
    if (!rec.ops[i].applied || !is_geometric(spec.ops[i])) continue;
    Mask out;
    if (std::holds_alternative<RandomResizeCrop>(spec.ops[i])) {
      const auto& c = std::get<CropParams>(rec.ops[i].params);
      out = Mask(m.height, m.width);
      for (int64_t r = 0; r < m.height; ++r)
        for (int64_t x = 0; x < m.width; ++x) {
          const int64_t sr = std::min<int64_t>(c.height - 1, static_cast<int64_t>(std::floor((r + 0.5) * c.height / m.height)));
          const int64_t sx = std::min<int64_t>(c.width - 1, static_cast<int64_t>(std::floor((x + 0.5) * c.width / m.width)));
          out.at(r, x) = m.at(c.top + sr, c.left + sx);
        }
    } else if (std::holds_alternative<Rotate90s>(spec.ops[i])) {
      const int k = std::get<RotateParams>(rec.ops[i].params).quarter_turns;
      out = m;
      for (int t = 0; t < k; ++t) {
        Mask rot(out.width, out.height);
        // One counter-clockwise quarter turn: out(r, c) = in(c, W-1-r).
        for (int64_t r = 0; r < rot.height; ++r)
          for (int64_t c = 0; c < rot.width; ++c) rot.at(r, c) = out.at(c, out.width - 1 - r);
        out = rot;
      }
    } else {
      const bool h = std::holds_alternative<HFlip>(spec.ops[i]);
      out = Mask(m.height, m.width);
      for (int64_t r = 0; r < m.height; ++r)
        for (int64_t c = 0; c < m.width; ++c)
          out.at(r, c) = h ? m.at(r, m.width - 1 - c) : m.at(m.height - 1 - r, c);
    }
    m = out;
  }
  return m;
}

TEST(Augment, ForcedHFlipMapsCoordinates) {
  std::mt19937_64 rng(1);
  ImageSample s = random_sample(rng, 5, 7);
  AugmentSpec spec{{HFlip{1.0}}, Mode::joint};
  Augmented a = apply(spec, s, 3);
  for (int64_t r = 0; r < 5; ++r)
    for (int64_t c = 0; c < 7; ++c) {
      EXPECT_EQ(a.mask->at(r, 6 - c), s.mask.at(r, c));
      for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(a.image.at(r, 6 - c, ch), s.image.at(r, c, ch));
    }
}

TEST(Augment, NormalizeHalfMapsToZero) {
  Image img(2, 2, 0.5f);
  Augmented a = apply(AugmentSpec{{Normalize{}}, Mode::image_only}, img, 0);
  for (float v : a.image.pixels) EXPECT_EQ(v, 0.0f);
  Image one(1, 1, 1.0f);
  EXPECT_EQ(normalize_image(one).pixels[0], 1.0f);
}

TEST(Augment, ZeroNoiseIsIdentity) {
  std::mt19937_64 rng(2);
  ImageSample s = random_sample(rng, 9, 9);
  Augmented a = apply(AugmentSpec{{GaussianNoise{0.0, 1.0}}, Mode::joint}, s, 5);
  EXPECT_EQ(a.image, s.image);
  EXPECT_EQ(*a.mask, s.mask);
}

TEST(Augment, CropScaleOutOfRangeRejected) {
  std::mt19937_64 rng(2);
  ImageSample s = random_sample(rng, 8, 8);
  EXPECT_THROW(apply(AugmentSpec{{RandomResizeCrop{0.0, 1.0}}, Mode::joint}, s, 0), ConfigError);
  EXPECT_THROW(apply(AugmentSpec{{RandomResizeCrop{0.5, 1.2}}, Mode::joint}, s, 0), ConfigError);
  EXPECT_THROW(apply(AugmentSpec{{Normalize{}, VFlip{}}, Mode::joint}, s, 0), ConfigError);
}

TEST(Augment, JointModeNeedsMask) {
  EXPECT_THROW(apply(preset("base"), Image(4, 4), 0), ValidationError);
  EXPECT_NO_THROW(apply(preset("base", Mode::image_only), Image(4, 4), 0));
}

TEST(Presets, Structure) {
  AugmentSpec base = preset("base");
  ASSERT_EQ(base.ops.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<RandomResizeCrop>(base.ops[0]));
  EXPECT_DOUBLE_EQ(std::get<RandomResizeCrop>(base.ops[0]).scale_lo, 0.8);
  EXPECT_DOUBLE_EQ(std::get<RandomResizeCrop>(base.ops[0]).scale_hi, 1.0);
  EXPECT_TRUE(std::holds_alternative<Rotate90s>(base.ops[1]));
  EXPECT_TRUE(std::holds_alternative<VFlip>(base.ops[2]));
  EXPECT_TRUE(std::holds_alternative<Normalize>(base.ops[3]));

  AugmentSpec c06 = preset("base_blur_crop06");
  EXPECT_DOUBLE_EQ(std::get<RandomResizeCrop>(c06.ops[0]).scale_lo, 0.6);
  EXPECT_TRUE(std::holds_alternative<GaussianBlur>(c06.ops[3]));
  EXPECT_EQ(std::string(kDefaultPreset), "base_blur");
  EXPECT_EQ(preset_names().size(), 7u);
  for (const auto& n : preset_names()) {
    AugmentSpec p = preset(n);
    EXPECT_NO_THROW(p.validate());
    EXPECT_TRUE(std::holds_alternative<Normalize>(p.ops.back())) << n;
  }
  EXPECT_EQ(preset("base_gray").ops.size(), 5u);
  EXPECT_TRUE(std::holds_alternative<BrightnessContrast>(preset("base_blur_bc").ops[4]));
  EXPECT_TRUE(std::holds_alternative<GridDropout>(preset("base_blur_grid").ops[4]));
  EXPECT_THROW(preset("fancy"), ConfigError);
}

TEST(Augment, SeedDeterminismAndReplay) {
  std::mt19937_64 rng(3);
  for (const auto& name : preset_names()) {
    ImageSample s = random_sample(rng, 20, 24);
    AugmentSpec spec = preset(name);
    Augmented a = apply(spec, s, 99), b = apply(spec, s, 99);
    EXPECT_EQ(a.image, b.image) << name;
    EXPECT_EQ(*a.mask, *b.mask) << name;
    Augmented r = replay(spec, a.record, s.image, s.mask);
    EXPECT_EQ(r.image, a.image) << name;
    EXPECT_EQ(*r.mask, *a.mask) << name;
  }
}

TEST(Augment, IndependentDrawsDiffer) {
  std::mt19937_64 rng(4);
  ImageSample s = random_sample(rng, 32, 32);
  AugmentSpec spec = preset("base_blur", Mode::image_only);
  int differ = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) differ += apply(spec, s.image, seed).image != apply(spec, s.image, seed + 100).image;
  EXPECT_GE(differ, 8);
}

TEST(Augment, GeometricConsistencyProperty) {
  std::mt19937_64 rng(5);
  const std::vector<AugmentSpec> geometric{
      {{RandomResizeCrop{0.8, 1.0}, Rotate90s{}, VFlip{}}, Mode::joint},
      {{RandomResizeCrop{0.6, 1.0}, Rotate90s{}, VFlip{}}, Mode::joint},
      {{Rotate90s{}, HFlip{}, VFlip{}}, Mode::joint},
  };
  for (int trial = 0; trial < 200; ++trial) {
    const AugmentSpec& spec = geometric[static_cast<size_t>(trial) % geometric.size()];
    ImageSample s = mask_coded_sample(rng, 6 + static_cast<int64_t>(rng() % 30), 6 + static_cast<int64_t>(rng() % 30));
    Augmented a = apply(spec, s, static_cast<uint64_t>(trial));
    ASSERT_TRUE(a.mask->is_binary());
    ASSERT_EQ(*a.mask, oracle_geometry(spec, a.record, s.mask));
    ASSERT_EQ(*a.mask, transform_mask(spec, a.record, s.mask));
    const bool resamples = std::holds_alternative<RandomResizeCrop>(spec.ops[0]) && a.record.ops[0].applied;
    if (!resamples) {
      for (int64_t r = 0; r < a.image.height; ++r)
        for (int64_t c = 0; c < a.image.width; ++c) ASSERT_EQ(a.image.at(r, c, 0), a.mask->at(r, c));
    }
  }
}

TEST(Augment, PhotometricOpsLeaveMaskAndBinary) {
  std::mt19937_64 rng(6);
  const AugmentSpec photometric{{GaussianBlur{5, 0.1, 2.0, 1.0}, GaussianNoise{0.05, 1.0}, ToGray{1.0},
                                 BrightnessContrast{0.2, 1.0}, GridDropout{0.5, 1.0}, Normalize{}},
                                Mode::joint};
  for (int trial = 0; trial < 30; ++trial) {
    ImageSample s = random_sample(rng, 16, 20);
    Augmented a = apply(photometric, s, static_cast<uint64_t>(trial));
    EXPECT_EQ(*a.mask, s.mask);
    EXPECT_NE(a.image, s.image);
  }
  for (const auto& name : preset_names()) {
    for (int trial = 0; trial < 10; ++trial) {
      ImageSample s = random_sample(rng, 12, 17);
      Augmented a = apply(preset(name), s, static_cast<uint64_t>(trial));
      EXPECT_TRUE(a.mask->is_binary());
      EXPECT_EQ(a.mask->size(), a.image.size());
    }
  }
}

TEST(Augment, BlurPreservesConstantAndGrayEqualizesChannels) {
  Image c(9, 9, 0.3f);
  Augmented b = apply(AugmentSpec{{GaussianBlur{5, 1.0, 1.0, 1.0}}, Mode::image_only}, c, 0);
  for (float v : b.image.pixels) EXPECT_NEAR(v, 0.3f, 1e-6);
  std::mt19937_64 rng(7);
  ImageSample s = random_sample(rng, 4, 4);
  Augmented g = apply(AugmentSpec{{ToGray{1.0}}, Mode::image_only}, s.image, 0);
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t x = 0; x < 4; ++x) {
      EXPECT_EQ(g.image.at(r, x, 0), g.image.at(r, x, 1));
      EXPECT_EQ(g.image.at(r, x, 1), g.image.at(r, x, 2));
    }
}

}  // namespace
}  // namespace clpolyp::augment
