// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clpolyp/data/dataset.h"

namespace clpolyp::objectives {

struct Confusion {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct Scores {
  double dice = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f2 = 0.0;
};

/// Empty ground truth: 1.0 on every metric if the prediction is empty too, else 0.0.
inline constexpr const char* kEmptyMaskConvention =
    "empty ground truth scores 1.0 on all metrics when the prediction is empty and 0.0 otherwise; "
    "undefined ratios with non-empty ground truth score 0.0";

/// ValidationError on shape mismatch or non-binary input.
Confusion confusion(const data::Mask& prediction, const data::Mask& truth);
Scores scores(const Confusion& c);
inline Scores metrics(const data::Mask& prediction, const data::Mask& truth) { return scores(confusion(prediction, truth)); }

/// Binary prediction from logits: sigmoid(z) >= 0.5, i.e. z >= 0.
data::Mask threshold_logits(const double* logits, int64_t height, int64_t width);

struct ImageMetrics {
  std::string id;
  Scores scores;
};

class MetricReport {
 public:
  void add(std::string id, const Scores& s);
  const std::vector<ImageMetrics>& per_image() const { return rows_; }
  /// Arithmetic means of the per-image columns; zeros when empty.
  Scores means() const;
  /// Count of images with empty ground truth, reported alongside the convention.
  int64_t empty_truth_count() const { return empty_truth_; }
  void note_empty_truth() { ++empty_truth_; }

  /// Header, one row per image, then a `mean` row.
  void write_csv(const std::filesystem::path& path) const;
  /// Means, image count and the empty-mask convention.
  void write_json(const std::filesystem::path& path, const std::string& dataset) const;

 private:
  std::vector<ImageMetrics> rows_;
  int64_t empty_truth_ = 0;
};

}  // namespace clpolyp::objectives
