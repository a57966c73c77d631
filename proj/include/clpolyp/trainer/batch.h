// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpolyp/augment/augment.h"
#include "clpolyp/data/manifest.h"
#include "clpolyp/netcore/tensor.h"
#include "clpolyp/taxonomy/taxonomy.h"

namespace clpolyp::trainer {

/// Stable seed from a tuple of counters (splitmix64 chain).
uint64_t mix_seed(std::initializer_list<uint64_t> parts);

/// Samples at the working resolution, loaded lazily from a manifest or held in
/// memory. Safe for concurrent reads.
class SampleStore {
 public:
  /// Keeps up to `cache_bytes` of decoded samples resident.
  SampleStore(data::DatasetManifest manifest, data::Size2 size, int64_t cache_bytes = int64_t{256} << 20);
  explicit SampleStore(std::vector<data::ImageSample> samples);

  size_t size() const { return ids_.size(); }
  const std::string& id(size_t i) const { return ids_.at(i); }
  std::shared_ptr<const data::ImageSample> get(size_t i) const;

 private:
  data::DatasetManifest manifest_;
  data::Size2 size_{};
  std::vector<std::string> ids_;
  int64_t cache_budget_ = 0;
  mutable std::mutex mu_;
  mutable std::unordered_map<size_t, std::shared_ptr<const data::ImageSample>> cache_;
  mutable int64_t cached_bytes_ = 0;
};

/// Taxonomy of every training mask, in store order.
struct TaxonomyIndex {
  std::vector<taxonomy::PoolEntry> entries;
};

/// ValidationError naming the sample when a mask is empty.
TaxonomyIndex build_taxonomy_index(const SampleStore& store, const taxonomy::SizeThresholds& thresholds);

struct TripletBatch {
  std::vector<std::string> anchor_ids;
  netcore::Tensor anchors;    // B×3×H×W, joint-augmented
  netcore::Tensor masks;      // B×1×H×W, same geometry as anchors
  netcore::Tensor positives;  // B×3×H×W, empty without the contrastive branch
  netcore::Tensor negatives;  // (B·K)×3×H×W, anchor b owns rows [b·K, (b+1)·K)
  std::vector<std::vector<std::string>> negative_ids;
  std::vector<taxonomy::MaskTaxonomy> anchor_taxonomy;
  std::vector<std::vector<taxonomy::MaskTaxonomy>> negative_taxonomy;
};

struct BatchRecipe {
  augment::AugmentSpec joint;       // anchor image + mask
  augment::AugmentSpec image_only;  // positive and negative views
  int K = 4;
  bool contrastive = true;
};

/// Anchor augmentation seeds depend only on (batch_seed, slot), never on the
/// contrastive settings, so runs with and without the branch see the same anchors.
TripletBatch build_batch(const SampleStore& store, const TaxonomyIndex& index, const BatchRecipe& recipe,
                         std::span<const size_t> indices, uint64_t batch_seed);

}  // namespace clpolyp::trainer
