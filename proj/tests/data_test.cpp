// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "clpolyp/data/dataset.h"
#include "clpolyp/data/manifest.h"
#include "clpolyp/data/synthetic.h"
#include "clpolyp/errors.h"

namespace clpolyp::data {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("clpolyp_data_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_gray(const fs::path& p, const cv::Mat& m) {
  fs::create_directories(p.parent_path());
  ASSERT_TRUE(cv::imwrite(p.string(), m));
}

DatasetManifest fake_manifest(const std::string& name, int n) {
  DatasetManifest m;
  m.name = name;
  for (int i = 0; i < n; ++i) {
    const std::string id = name + "_" + std::to_string(i);
    m.entries.push_back({"/data/" + name + "/images/" + id + ".png", "/data/" + name + "/masks/" + id + ".png"});
  }
  return m;
}

TEST(Binarize, ThresholdAt128) {
  EXPECT_EQ(binarize(255), 1);
  EXPECT_EQ(binarize(0), 0);
  EXPECT_EQ(binarize(128), 1);
  EXPECT_EQ(binarize(127), 0);
}

TEST(LoadSample, BinarizesMaskFromFile) {
  TempDir dir;
  cv::Mat img(2, 2, CV_8UC3, cv::Scalar(10, 20, 30));
  cv::Mat mask = (cv::Mat_<uint8_t>(2, 2) << 0, 127, 128, 255);
  write_gray(dir.path() / "i.png", img);
  write_gray(dir.path() / "m.png", mask);
  ImageSample s = load_sample(dir.path() / "i.png", dir.path() / "m.png", {2, 2});
  EXPECT_EQ(s.mask.values, (std::vector<uint8_t>{0, 0, 1, 1}));
  // BGR on disk -> RGB in memory.
  EXPECT_FLOAT_EQ(s.image.at(0, 0, 0), 30.0f / 255.0f);
  EXPECT_FLOAT_EQ(s.image.at(0, 0, 2), 10.0f / 255.0f);
  EXPECT_EQ(s.id, "i");
}

TEST(LoadSample, ResizesKvasirSizedInputAndIsIdempotent) {
  TempDir dir;
  cv::Mat img(332, 487, CV_8UC3);
  cv::randu(img, 0, 256);
  cv::Mat mask(332, 487, CV_8UC1, cv::Scalar(0));
  mask(cv::Rect(150, 100, 120, 90)).setTo(255);
  write_gray(dir.path() / "images/a.png", img);
  write_gray(dir.path() / "masks/a.png", mask);
  ImageSample s = load_sample(dir.path() / "images/a.png", dir.path() / "masks/a.png", {384, 384});
  EXPECT_EQ(s.image.size(), (Size2{384, 384}));
  EXPECT_EQ(s.mask.size(), (Size2{384, 384}));
  EXPECT_NO_THROW(s.validate());
  EXPECT_GT(s.mask.foreground(), 0);
  for (float v : s.image.pixels) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  ImageSample again = load_sample(dir.path() / "images/a.png", dir.path() / "masks/a.png", {384, 384});
  EXPECT_EQ(s.image, again.image);
  EXPECT_EQ(s.mask, again.mask);
}

TEST(LoadSample, RandomMasksStayBinary) {
  TempDir dir;
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 5 + static_cast<int>(rng() % 40), w = 5 + static_cast<int>(rng() % 40);
    cv::Mat img(h, w, CV_8UC3, cv::Scalar(1, 2, 3));
    cv::Mat mask(h, w, CV_8UC1);
    cv::randu(mask, 0, 256);
    write_gray(dir.path() / "i.png", img);
    write_gray(dir.path() / "m.png", mask);
    const Size2 target{1 + static_cast<int64_t>(rng() % 64), 1 + static_cast<int64_t>(rng() % 64)};
    ImageSample s = load_sample(dir.path() / "i.png", dir.path() / "m.png", target);
    ASSERT_TRUE(s.mask.is_binary());
  }
}

TEST(LoadSample, ErrorsNamePathAndCatchSizeMismatch) {
  TempDir dir;
  write_gray(dir.path() / "i.png", cv::Mat(4, 4, CV_8UC3, cv::Scalar(0)));
  write_gray(dir.path() / "m.png", cv::Mat(4, 5, CV_8UC1, cv::Scalar(0)));
  EXPECT_THROW(load_sample(dir.path() / "i.png", dir.path() / "m.png", {8, 8}), ValidationError);
  try {
    load_sample(dir.path() / "missing.png", dir.path() / "m.png", {8, 8});
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
  }
}

TEST(Resize, NearestKeepsBinaryAndBilinearKeepsConstant) {
  Mask m(3, 5);
  m.at(1, 2) = 1;
  Mask up = resize_nearest(m, {9, 15});
  EXPECT_TRUE(up.is_binary());
  EXPECT_EQ(up.foreground(), 9);
  Image c(7, 3, 0.25f);
  for (float v : resize_bilinear(c, {5, 11}).pixels) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(ScenarioSplit, ScenarioOneIs700By300) {
  const DatasetManifest kvasir = fake_manifest("kvasir", 1000);
  ScenarioSplit s = make_scenario_split(std::span(&kvasir, 1), Scenario::I, 1);
  EXPECT_EQ(s.train.entries.size(), 700u);
  ASSERT_EQ(s.tests.size(), 1u);
  EXPECT_EQ(s.tests[0].entries.size(), 300u);
  EXPECT_EQ(s.tests[0].split, Split::test);
}

TEST(ScenarioSplit, ScenarioTwoNinetyTen) {
  const DatasetManifest tiny = fake_manifest("tiny", 10);
  ScenarioSplit s = make_scenario_split(std::span(&tiny, 1), Scenario::II, 5);
  EXPECT_EQ(s.train.entries.size(), 9u);
  EXPECT_EQ(s.tests.at(0).entries.size(), 1u);

  // Full-scale shape: 1000 Kvasir + 612 ClinicDB.
  const std::vector<DatasetManifest> both{fake_manifest("kvasir", 1000), fake_manifest("clinicdb", 612)};
  ScenarioSplit full = make_scenario_split(both, Scenario::II, 5);
  EXPECT_EQ(full.tests.at(0).entries.size(), 100u);
  EXPECT_EQ(full.tests.at(1).entries.size(), 61u);
  EXPECT_EQ(full.train.entries.size(), 900u + 551u);
}

TEST(ScenarioSplit, DeterministicDisjointAndComplete) {
  const std::vector<DatasetManifest> both{fake_manifest("a", 37), fake_manifest("b", 23)};
  for (Scenario sc : {Scenario::I, Scenario::II, Scenario::III}) {
    for (uint64_t seed = 0; seed < 10; ++seed) {
      std::span<const DatasetManifest> in = sc == Scenario::II ? std::span(both) : std::span(both).first(1);
      ScenarioSplit a = make_scenario_split(in, sc, seed);
      ScenarioSplit b = make_scenario_split(in, sc, seed);
      EXPECT_EQ(a.train.entries, b.train.entries);
      std::set<std::string> train_ids, test_ids, all_ids;
      for (const auto& e : a.train.entries) train_ids.insert(e.id());
      size_t tests = 0;
      for (const auto& t : a.tests) {
        for (const auto& e : t.entries) test_ids.insert(e.id());
        tests += t.entries.size();
      }
      for (const auto& m : in)
        for (const auto& e : m.entries) all_ids.insert(e.id());
      EXPECT_EQ(train_ids.size() + test_ids.size(), all_ids.size());
      EXPECT_EQ(tests, test_ids.size());
      for (const auto& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
      std::set<std::string> uni = train_ids;
      uni.insert(test_ids.begin(), test_ids.end());
      EXPECT_EQ(uni, all_ids);
    }
  }
  ScenarioSplit x = make_scenario_split(std::span(both).first(1), Scenario::I, 1);
  ScenarioSplit y = make_scenario_split(std::span(both).first(1), Scenario::I, 2);
  EXPECT_NE(x.train.entries, y.train.entries);
}

TEST(ScenarioSplit, Errors) {
  const DatasetManifest small = fake_manifest("s", 9);
  EXPECT_THROW(make_scenario_split(std::span(&small, 1), Scenario::I, 0), ValidationError);
  const std::vector<DatasetManifest> two{fake_manifest("a", 20), fake_manifest("b", 20)};
  EXPECT_THROW(make_scenario_split(two, Scenario::I, 0), ValidationError);
  DatasetManifest dup = fake_manifest("d", 12);
  dup.entries.push_back(dup.entries.front());
  EXPECT_THROW(make_scenario_split(std::span(&dup, 1), Scenario::III, 0), ValidationError);
  EXPECT_THROW(parse_scenario("IV"), ConfigError);
}

TEST(Manifest, ScanWriteReadRoundTrip) {
  TempDir dir;
  for (const auto& s : make_synthetic_dataset(3, {16, 16}, 1)) write_sample(dir.path() / "ds", s);
  DatasetManifest m = scan_dataset(dir.path() / "ds");
  EXPECT_EQ(m.name, "ds");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[0].id(), "synth_0000");
  write_manifest(dir.path() / "ds.tsv", m);
  DatasetManifest back = read_manifest(dir.path() / "ds.tsv");
  EXPECT_EQ(back.entries, m.entries);
  fs::remove(dir.path() / "ds/masks/synth_0001.png");
  EXPECT_THROW(scan_dataset(dir.path() / "ds"), ValidationError);
}

TEST(Synthetic, CategoriesAndSeparatedLesions) {
  auto samples = make_synthetic_dataset(6, {96, 96}, 3);
  for (const auto& s : samples) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_GT(s.mask.foreground(), 0);
  }
}

}  // namespace
}  // namespace clpolyp::data
