// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clpolyp/data/manifest.h"
#include "clpolyp/model/network_spec.h"
#include "clpolyp/objectives/losses.h"
#include "clpolyp/taxonomy/taxonomy.h"

namespace clpolyp::trainer {

/// Training configuration, read from a flat `key = value` file.
///
/// Keys (defaults in brackets):
///   name [run]  output_root [runs]  scenario [I]  seed [0]
///   data_roots            comma-separated dataset roots (`<root>/images`, `<root>/masks`)
///   extra_test_roots      whole datasets evaluated after training
///   train_manifest, test_manifests   explicit manifests instead of a scenario split
///   backbone [tiny]  input_size [384 or HxW]  maspp_channels, projection_dim [per backbone]
///   use_maspp, use_ca, use_cl_branch [true]  momentum [0.999]  se_reduction [16]  backbone_weights
///   alpha [0.2]  beta [0.5]  K [4]  dice_smooth [1]
///   size_small_max [0.05]  size_medium_max [0.15]
///   augment_preset [base_blur]  batch_size [4]  epochs [300]  lr0 [1e-4]  checkpoint_every [1]
///   max_steps [0 = no limit]  resume [checkpoint path or `latest`]  dry_run [false]
struct TrainConfig {
  std::string name = "run";
  std::filesystem::path output_root = "runs";
  data::Scenario scenario = data::Scenario::I;
  uint64_t seed = 0;
  std::vector<std::filesystem::path> data_roots;
  std::vector<std::filesystem::path> extra_test_roots;
  std::filesystem::path train_manifest;
  std::vector<std::filesystem::path> test_manifests;

  model::NetworkSpec network = model::NetworkSpec::tiny();
  objectives::LossConfig loss;
  taxonomy::SizeThresholds thresholds;

  std::string augment_preset = "base_blur";
  int64_t batch_size = 4;
  int64_t epochs = 300;
  double lr0 = 1e-4;
  int64_t checkpoint_every = 1;

  int64_t max_steps = 0;
  std::string resume;
  bool dry_run = false;

  std::filesystem::path run_dir() const { return output_root / name; }

  /// ConfigError on inconsistent values.
  void validate() const;

  /// Canonical `key = value` text covering every key.
  std::string to_text() const;
  /// Hash of the keys that shape the training trajectory (excludes run control).
  uint64_t trajectory_hash() const;
};

/// Applies `key = value` lines ('#' starts a comment) on top of defaults.
/// Setting `backbone` resets backbone-dependent widths unless set explicitly.
TrainConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace clpolyp::trainer
