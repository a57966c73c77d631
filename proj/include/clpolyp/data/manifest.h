// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace clpolyp::data {

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path mask;

  /// Sample id: the image file stem.
  std::string id() const { return image.stem().string(); }
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

enum class Split { train, test };

struct DatasetManifest {
  std::string name;
  std::vector<ManifestEntry> entries;
  Split split = Split::train;

  /// Throws ValidationError on duplicate ids.
  void validate() const;
};

/// Pairs `<root>/images/*.{png,jpg,jpeg}` with `<root>/masks/*` by file stem.
/// Images without a mask are an error; entries are sorted by id.
DatasetManifest scan_dataset(const std::filesystem::path& root, std::string name = {});

/// One `image_path<TAB>mask_path` line per entry, UTF-8, LF endings.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path, Split split = Split::test);

enum class Scenario { I, II, III };

Scenario parse_scenario(const std::string& text);
std::string to_string(Scenario s);

struct ScenarioSplit {
  DatasetManifest train;
  /// One held-out manifest per source dataset, in input order.
  std::vector<DatasetManifest> tests;
};

/// Scenario I / III: a single dataset split 70/30. Scenario II: each source
/// split 90/10, training halves concatenated. Test counts are floored, train
/// gets the remainder, and both halves keep the input order. Deterministic in `seed`.
ScenarioSplit make_scenario_split(std::span<const DatasetManifest> datasets, Scenario scenario, uint64_t seed);

}  // namespace clpolyp::data
