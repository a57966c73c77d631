// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/trainer/batch.h"

#include <algorithm>

#include "clpolyp/errors.h"

namespace clpolyp::trainer {

using data::ImageSample;
using netcore::Tensor;

uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (uint64_t p : parts) {
    uint64_t z = h + p + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

SampleStore::SampleStore(data::DatasetManifest manifest, data::Size2 size, int64_t cache_bytes)
    : manifest_(std::move(manifest)), size_(size), cache_budget_(cache_bytes) {
  manifest_.validate();
  for (const auto& e : manifest_.entries) ids_.push_back(e.id());
}

SampleStore::SampleStore(std::vector<ImageSample> samples) : cache_budget_(-1) {
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i].validate();
    ids_.push_back(samples[i].id);
    cache_[i] = std::make_shared<const ImageSample>(std::move(samples[i]));
  }
}

std::shared_ptr<const ImageSample> SampleStore::get(size_t i) const {
  if (i >= ids_.size()) throw ValidationError("sample index " + std::to_string(i) + " out of range");
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(i);
    if (it != cache_.end()) return it->second;
  }
  const auto& e = manifest_.entries.at(i);
  auto s = std::make_shared<const ImageSample>(data::load_sample(e.image, e.mask, size_));
  const auto bytes = static_cast<int64_t>(s->image.pixels.size() * sizeof(float) + s->mask.values.size());
  std::lock_guard lock(mu_);
  if (cached_bytes_ + bytes <= cache_budget_) {
    cache_.emplace(i, s);
    cached_bytes_ += bytes;
  }
  return s;
}

TaxonomyIndex build_taxonomy_index(const SampleStore& store, const taxonomy::SizeThresholds& thresholds) {
  TaxonomyIndex index;
  index.entries.reserve(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    try {
      index.entries.push_back({store.id(i), taxonomy::classify_mask(store.get(i)->mask, thresholds)});
    } catch (const ValidationError& e) {
      throw ValidationError("training sample '" + store.id(i) + "': " + e.what());
    }
  }
  return index;
}

namespace {

void copy_image(const data::Image& img, Tensor& dst, int64_t slot) {
  const int64_t h = img.height, w = img.width, plane = h * w;
  double* base = dst.data() + slot * 3 * plane;
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) base[ch * plane + r * w + c] = img.at(r, c, ch);
}

}  // namespace

TripletBatch build_batch(const SampleStore& store, const TaxonomyIndex& index, const BatchRecipe& recipe,
                         std::span<const size_t> indices, uint64_t batch_seed) {
  if (indices.empty()) throw ValidationError("build_batch: empty batch");
  const int64_t B = static_cast<int64_t>(indices.size());
  TripletBatch batch;
  std::unordered_map<std::string, size_t> by_id;
  for (size_t i = 0; i < store.size(); ++i) by_id.emplace(store.id(i), i);

  for (int64_t b = 0; b < B; ++b) {
    const size_t src = indices[static_cast<size_t>(b)];
    auto sample = store.get(src);
    const uint64_t slot_seed = mix_seed({batch_seed, static_cast<uint64_t>(b)});
    augment::Augmented anchor = augment::apply(recipe.joint, *sample, mix_seed({slot_seed, 0}));
    const int64_t h = anchor.image.height, w = anchor.image.width;
    if (b == 0) {
      batch.anchors = Tensor({B, 3, h, w});
      batch.masks = Tensor({B, 1, h, w});
    } else if (batch.anchors.dim(2) != h || batch.anchors.dim(3) != w) {
      throw ShapeError("build_batch: augmented sizes differ within the batch");
    }
    copy_image(anchor.image, batch.anchors, b);
    for (int64_t i = 0; i < h * w; ++i) batch.masks[b * h * w + i] = anchor.mask->values[static_cast<size_t>(i)];
    batch.anchor_ids.push_back(store.id(src));
    if (!recipe.contrastive) continue;

    const taxonomy::MaskTaxonomy& anchor_tax = index.entries.at(src).taxonomy;
    batch.anchor_taxonomy.push_back(anchor_tax);
    augment::Augmented pos = augment::apply(recipe.image_only, sample->image, mix_seed({slot_seed, 1}));
    if (b == 0) {
      batch.positives = Tensor({B, 3, pos.image.height, pos.image.width});
      batch.negatives = Tensor({B * recipe.K, 3, pos.image.height, pos.image.width});
    }
    copy_image(pos.image, batch.positives, b);

    std::vector<taxonomy::PoolEntry> pool;
    pool.reserve(index.entries.size());
    for (size_t i = 0; i < index.entries.size(); ++i)
      if (i != src) pool.push_back(index.entries[i]);
    const auto neg_ids = taxonomy::select_negatives(anchor_tax, pool, recipe.K, mix_seed({slot_seed, 2}));
    std::vector<taxonomy::MaskTaxonomy> neg_tax;
    for (size_t j = 0; j < neg_ids.size(); ++j) {
      const size_t ni = by_id.at(neg_ids[j]);
      neg_tax.push_back(index.entries[ni].taxonomy);
      augment::Augmented view =
          augment::apply(recipe.image_only, store.get(ni)->image, mix_seed({slot_seed, 3 + static_cast<uint64_t>(j)}));
      copy_image(view.image, batch.negatives, b * recipe.K + static_cast<int64_t>(j));
    }
    batch.negative_ids.push_back(neg_ids);
    batch.negative_taxonomy.push_back(std::move(neg_tax));
  }
  return batch;
}

}  // namespace clpolyp::trainer
