// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clpolyp/data/dataset.h"

namespace clpolyp::taxonomy {

enum class CountClass { one, many };
enum class SizeClass { small, medium, large };

std::string to_string(CountClass c);
std::string to_string(SizeClass s);

struct SizeThresholds {
  double small_max = 0.05;
  double medium_max = 0.15;

  /// Throws ConfigError unless 0 < small_max < medium_max < 1.
  void validate() const;
  friend bool operator==(const SizeThresholds&, const SizeThresholds&) = default;
};

/// [0, small_max) small, [small_max, medium_max) medium, [medium_max, 1] large.
SizeClass size_bucket(double area_fraction, const SizeThresholds& thresholds);

struct MaskTaxonomy {
  CountClass count_class = CountClass::one;
  SizeClass size_class = SizeClass::small;
  double area_fraction = 0.0;
  int64_t component_count = 0;

  /// 0..5, count-major.
  int category() const { return static_cast<int>(count_class) * 3 + static_cast<int>(size_class); }
  std::string category_name() const;
  friend bool operator==(const MaskTaxonomy&, const MaskTaxonomy&) = default;
};

enum class Connectivity { four = 4, eight = 8 };

struct Labels {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<int32_t> values;
  int32_t count = 0;

  int32_t at(int64_t r, int64_t c) const { return values[static_cast<size_t>(r * width + c)]; }
};

/// Background 0; components numbered 1..count in raster order of their first pixel.
Labels connected_components(const data::Mask& mask, Connectivity connectivity = Connectivity::eight);

/// Throws ValidationError ("no polyp present") for an empty mask.
MaskTaxonomy classify_mask(const data::Mask& mask, const SizeThresholds& thresholds = {});

struct PoolEntry {
  std::string id;
  MaskTaxonomy taxonomy;
};

/// True when `candidate` differs from `anchor` in both count and size.
bool is_strict_negative(const MaskTaxonomy& anchor, const MaskTaxonomy& candidate);

/// K ids of strict negatives, without replacement while candidates last, then
/// topped up with replacement (logged once per process). Throws SamplingError
/// when no strict candidate exists.
std::vector<std::string> select_negatives(const MaskTaxonomy& anchor, const std::vector<PoolEntry>& pool, int K,
                                          uint64_t seed);

}  // namespace clpolyp::taxonomy
