// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/objectives/metrics.h"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "clpolyp/errors.h"

namespace clpolyp::objectives {

Confusion confusion(const data::Mask& prediction, const data::Mask& truth) {
  if (prediction.size() != truth.size()) {
    throw ValidationError("metrics: prediction " + std::to_string(prediction.height) + "x" +
                          std::to_string(prediction.width) + " vs truth " + std::to_string(truth.height) + "x" +
                          std::to_string(truth.width));
  }
  if (!prediction.is_binary() || !truth.is_binary()) throw ValidationError("metrics: masks must be binary");
  Confusion c;
  for (size_t i = 0; i < truth.values.size(); ++i) {
    const bool p = prediction.values[i], g = truth.values[i];
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
    c.tn += !p && !g;
  }
  return c;
}

namespace {
double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
}  // namespace

Scores scores(const Confusion& c) {
  if (c.tp + c.fn == 0) {
    const double v = c.fp == 0 ? 1.0 : 0.0;
    return {v, v, v, v, v};
  }
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  Scores s;
  s.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  s.iou = ratio(tp, tp + fp + fn);
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f2 = ratio(5.0 * s.precision * s.recall, 4.0 * s.precision + s.recall);
  return s;
}

data::Mask threshold_logits(const double* logits, int64_t height, int64_t width) {
  data::Mask m(height, width);
  for (int64_t i = 0; i < height * width; ++i) m.values[static_cast<size_t>(i)] = logits[i] >= 0.0 ? 1 : 0;
  return m;
}

void MetricReport::add(std::string id, const Scores& s) { rows_.push_back({std::move(id), s}); }

Scores MetricReport::means() const {
  Scores m;
  if (rows_.empty()) return m;
  for (const auto& r : rows_) {
    m.dice += r.scores.dice;
    m.iou += r.scores.iou;
    m.precision += r.scores.precision;
    m.recall += r.scores.recall;
    m.f2 += r.scores.f2;
  }
  const auto n = static_cast<double>(rows_.size());
  return {m.dice / n, m.iou / n, m.precision / n, m.recall / n, m.f2 / n};
}

namespace {

std::string fmt_row(const std::string& id, const Scores& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g,%.17g\n", s.dice, s.iou, s.precision, s.recall, s.f2);
  return id + buf;
}

}  // namespace

void MetricReport::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,dice,iou,precision,recall,f2\n";
  for (const auto& r : rows_) out << fmt_row(r.id, r.scores);
  out << fmt_row("mean", means());
  if (!out) throw IoError("write failed: " + path.string());
}

void MetricReport::write_json(const std::filesystem::path& path, const std::string& dataset) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const Scores m = means();
  nlohmann::json j{{"dataset", dataset},
                   {"images", rows_.size()},
                   {"empty_truth_images", empty_truth_},
                   {"empty_mask_convention", kEmptyMaskConvention},
                   {"mean", {{"dice", m.dice}, {"iou", m.iou}, {"precision", m.precision}, {"recall", m.recall}, {"f2", m.f2}}}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace clpolyp::objectives
