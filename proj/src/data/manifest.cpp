// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/data/manifest.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "clpolyp/errors.h"

namespace clpolyp::data {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !is_image_file(e.path())) continue;
    const std::string stem = e.path().stem().string();
    if (!out.emplace(stem, e.path()).second) {
      throw ValidationError("two files with stem '" + stem + "' in " + dir.string());
    }
  }
  return out;
}

DatasetManifest take(const DatasetManifest& src, const std::vector<size_t>& picked, const std::string& suffix,
                     Split split) {
  DatasetManifest out;
  out.name = src.name + suffix;
  out.split = split;
  for (size_t i : picked) out.entries.push_back(src.entries[i]);
  return out;
}

std::pair<DatasetManifest, DatasetManifest> split_one(const DatasetManifest& m, int64_t test_num, int64_t test_den,
                                                      uint64_t seed) {
  m.validate();
  const size_t n = m.entries.size();
  if (n < 10) {
    throw ValidationError("dataset '" + m.name + "' has " + std::to_string(n) + " entries; at least 10 are required");
  }
  // Floor on the test side; train takes the remainder.
  const size_t n_test = n * static_cast<size_t>(test_num) / static_cast<size_t>(test_den);
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {take(m, train, "_train", Split::train), take(m, test, "_test", Split::test)};
}

}  // namespace

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id()).second) throw ValidationError("manifest '" + name + "' has duplicate id " + e.id());
  }
}

DatasetManifest scan_dataset(const fs::path& root, std::string name) {
  const auto images = files_by_stem(root / "images");
  const auto masks = files_by_stem(root / "masks");
  DatasetManifest m;
  m.name = name.empty() ? root.filename().string() : std::move(name);
  if (m.name.empty()) m.name = root.parent_path().filename().string();
  for (const auto& [stem, img] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) throw ValidationError("image " + img.string() + " has no mask in " + (root / "masks").string());
    m.entries.push_back({img, it->second});
  }
  if (m.entries.empty()) throw ValidationError("no images found under " + (root / "images").string());
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  for (const auto& e : manifest.entries) out << e.image.string() << '\t' << e.mask.string() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest read_manifest(const fs::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path.string());
  DatasetManifest m;
  m.name = path.stem().string();
  m.split = split;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected image<TAB>mask");
    }
    m.entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  m.validate();
  return m;
}

Scenario parse_scenario(const std::string& text) {
  if (text == "I" || text == "1") return Scenario::I;
  if (text == "II" || text == "2") return Scenario::II;
  if (text == "III" || text == "3") return Scenario::III;
  throw ConfigError("unknown scenario '" + text + "' (expected I, II or III)");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::III: return "III";
  }
  return "?";
}

ScenarioSplit make_scenario_split(std::span<const DatasetManifest> datasets, Scenario scenario, uint64_t seed) {
  ScenarioSplit out;
  if (scenario == Scenario::I || scenario == Scenario::III) {
    if (datasets.size() != 1) {
      throw ValidationError("scenario " + to_string(scenario) + " takes exactly one dataset, got " +
                            std::to_string(datasets.size()));
    }
    auto [train, test] = split_one(datasets[0], 3, 10, seed);
    out.train = std::move(train);
    out.tests.push_back(std::move(test));
    return out;
  }
  if (datasets.empty() || datasets.size() > 2) {
    throw ValidationError("scenario II takes the two source datasets, got " + std::to_string(datasets.size()));
  }
  out.train.split = Split::train;
  for (size_t i = 0; i < datasets.size(); ++i) {
    auto [train, test] = split_one(datasets[i], 1, 10, seed + i);
    out.train.name += (i ? "+" : "") + datasets[i].name;
    out.train.entries.insert(out.train.entries.end(), train.entries.begin(), train.entries.end());
    out.tests.push_back(std::move(test));
  }
  out.train.name += "_train";
  out.train.validate();
  return out;
}

}  // namespace clpolyp::data
