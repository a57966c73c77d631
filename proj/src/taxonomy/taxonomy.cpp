// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/taxonomy/taxonomy.h"

#include <algorithm>
#include <atomic>
#include <deque>
#include <random>

#include <spdlog/spdlog.h>

#include "clpolyp/errors.h"

namespace clpolyp::taxonomy {

std::string to_string(CountClass c) { return c == CountClass::one ? "one" : "many"; }

std::string to_string(SizeClass s) {
  switch (s) {
    case SizeClass::small:
      return "small";
    case SizeClass::medium:
      return "medium";
    case SizeClass::large:
      return "large";
  }
  return "?";
}

std::string MaskTaxonomy::category_name() const { return "(" + to_string(count_class) + ", " + to_string(size_class) + ")"; }

void SizeThresholds::validate() const {
  if (!(small_max > 0.0 && small_max < medium_max && medium_max < 1.0)) {
    throw ConfigError("size thresholds must satisfy 0 < small_max < medium_max < 1, got " + std::to_string(small_max) +
                      ", " + std::to_string(medium_max));
  }
}

SizeClass size_bucket(double area_fraction, const SizeThresholds& t) {
  if (area_fraction < t.small_max) return SizeClass::small;
  if (area_fraction < t.medium_max) return SizeClass::medium;
  return SizeClass::large;
}

Labels connected_components(const data::Mask& mask, Connectivity connectivity) {
  if (!mask.is_binary()) throw ValidationError("connected_components: mask is not binary");
  Labels out{mask.height, mask.width, std::vector<int32_t>(mask.values.size(), 0), 0};
  const bool diag = connectivity == Connectivity::eight;
  std::deque<std::pair<int64_t, int64_t>> queue;
  for (int64_t r = 0; r < mask.height; ++r) {
    for (int64_t c = 0; c < mask.width; ++c) {
      const size_t idx = static_cast<size_t>(r * mask.width + c);
      if (!mask.values[idx] || out.values[idx]) continue;
      const int32_t label = ++out.count;
      out.values[idx] = label;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int64_t dy = -1; dy <= 1; ++dy) {
          for (int64_t dx = -1; dx <= 1; ++dx) {
            if ((dy == 0 && dx == 0) || (!diag && dy != 0 && dx != 0)) continue;
            const int64_t ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= mask.height || nx >= mask.width) continue;
            const size_t n = static_cast<size_t>(ny * mask.width + nx);
            if (mask.values[n] && !out.values[n]) {
              out.values[n] = label;
              queue.emplace_back(ny, nx);
            }
          }
        }
      }
    }
  }
  return out;
}

MaskTaxonomy classify_mask(const data::Mask& mask, const SizeThresholds& thresholds) {
  thresholds.validate();
  const int64_t fg = mask.foreground();
  if (fg == 0) throw ValidationError("no polyp present");
  MaskTaxonomy t;
  t.component_count = connected_components(mask, Connectivity::eight).count;
  t.count_class = t.component_count == 1 ? CountClass::one : CountClass::many;
  t.area_fraction = static_cast<double>(fg) / static_cast<double>(mask.height * mask.width);
  t.size_class = size_bucket(t.area_fraction, thresholds);
  return t;
}

bool is_strict_negative(const MaskTaxonomy& anchor, const MaskTaxonomy& candidate) {
  return candidate.count_class != anchor.count_class && candidate.size_class != anchor.size_class;
}

std::vector<std::string> select_negatives(const MaskTaxonomy& anchor, const std::vector<PoolEntry>& pool, int K,
                                          uint64_t seed) {
  if (K <= 0) throw ConfigError("select_negatives: K must be positive");
  std::vector<size_t> candidates;
  for (size_t i = 0; i < pool.size(); ++i) {
    if (is_strict_negative(anchor, pool[i].taxonomy)) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw SamplingError("no strict negative candidates for anchor category " + anchor.category_name());
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(K));
  const size_t distinct = std::min(candidates.size(), static_cast<size_t>(K));
  for (size_t i = 0; i < distinct; ++i) out.push_back(pool[candidates[i]].id);
  if (distinct < static_cast<size_t>(K)) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      spdlog::warn("only {} strict negatives for anchor category {}; sampling with replacement to reach K={}",
                   candidates.size(), anchor.category_name(), K);
    }
    std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
    while (out.size() < static_cast<size_t>(K)) out.push_back(pool[candidates[pick(rng)]].id);
  }
  return out;
}

}  // namespace clpolyp::taxonomy
