// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "clpolyp/errors.h"
#include "clpolyp/netcore/gradcheck.h"
#include "clpolyp/netcore/layers.h"
#include "clpolyp/objectives/losses.h"
#include "clpolyp/objectives/metrics.h"
#include "test_util.h"

namespace clpolyp::objectives {
namespace {

using data::Mask;
using netcore::ParameterSet;
using testing::random_tensor;

Tensor from(const netcore::Shape& s, std::vector<double> v) {
  Tensor t(s);
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

Mask mask_of(int64_t h, int64_t w, std::vector<uint8_t> v) {
  Mask m(h, w);
  m.values = std::move(v);
  return m;
}

// Brute-force references.
double ref_bce(const Tensor& z, const Tensor& g) {
  double acc = 0.0;
  for (int64_t i = 0; i < z.numel(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    acc += -((1.0 - g[i]) * std::log(1.0 - p) + g[i] * std::log(p));
  }
  return acc / static_cast<double>(z.numel());
}

double ref_dice(const Tensor& p, const Tensor& g, double smooth) {
  double inter = 0.0, ps = 0.0, gs = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    inter += p[i] * g[i];
    ps += p[i];
    gs += g[i];
  }
  return 1.0 - (2.0 * inter + smooth) / (ps + gs + smooth);
}

TEST(Triplet, HandComputedExamples) {
  std::vector<double> a{1, 0}, p{1, 0}, n{0, 1};
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, {n}, 0.2), 0.0);
  std::vector<double> p2{0, 1}, n2{1, 0};
  EXPECT_NEAR(triplet_loss(a, p2, {n2}, 0.2), 2.2, 1e-12);
  EXPECT_NEAR(triplet_loss(a, a, {a, a, a, a}, 0.2), 0.8, 1e-12);
  EXPECT_EQ(triplet_loss(a, p, {}, 0.2), 0.0);
}

TEST(Triplet, BatchedMatchesPerAnchorAndIsNonNegative) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int64_t B = 1 + static_cast<int64_t>(rng() % 4), D = 2 + static_cast<int64_t>(rng() % 6);
    const int K = 1 + static_cast<int>(rng() % 4);
    Var h = netcore::l2_normalize(Var(random_tensor({B, D}, rng())));
    Tensor hp = netcore::l2_normalize(Var(random_tensor({B, D}, rng()))).value();
    Tensor hn = netcore::l2_normalize(Var(random_tensor({B * K, D}, rng()))).value();
    const double alpha = 0.05 + 0.5 * static_cast<double>(trial % 5) / 5.0;
    double expected = 0.0;
    for (int64_t b = 0; b < B; ++b) {
      std::vector<double> av(h.value().data() + b * D, h.value().data() + (b + 1) * D);
      std::vector<double> pv(hp.data() + b * D, hp.data() + (b + 1) * D);
      std::vector<std::vector<double>> negs;
      for (int j = 0; j < K; ++j) negs.emplace_back(hn.data() + (b * K + j) * D, hn.data() + (b * K + j + 1) * D);
      const double l = triplet_loss(av, pv, negs, alpha);
      EXPECT_GE(l, 0.0);
      expected += l;
    }
    EXPECT_NEAR(triplet_loss(h, hp, hn, K, alpha).item(), expected / static_cast<double>(B), 1e-12);
  }
}

TEST(Triplet, ZeroWhenNegativesFarEnough) {
  // d_p = 0, d_n = 2 >= 0 + alpha for alpha <= 2.
  std::vector<double> a{1, 0}, n{-1, 0};
  EXPECT_EQ(triplet_loss(a, a, {n, n}, 1.9), 0.0);
}

TEST(Triplet, GradientFlowsOnlyIntoAnchor) {
  ParameterSet ps;
  ps.add("h", random_tensor({3, 5}, 1));
  const Tensor hp = random_tensor({3, 5}, 2), hn = random_tensor({6, 5}, 3);
  auto r = netcore::gradient_check(ps, [&] { return triplet_loss(ps.at("h").var, hp, hn, 2, 0.7); },
                                   {.samples_per_tensor = 15});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Dice, Examples) {
  const Tensor ones({4}, 1.0), zeros({4});
  EXPECT_DOUBLE_EQ(dice_loss(Var(ones), ones, 1.0).item(), 0.0);
  EXPECT_DOUBLE_EQ(dice_loss(Var(zeros), ones, 0.0).item(), 1.0);
  EXPECT_DOUBLE_EQ(dice_loss(Var(from({4}, {1, 1, 0, 0})), from({4}, {1, 0, 1, 0}), 0.0).item(), 0.5);
  EXPECT_THROW(dice_loss(Var(from({2}, {1.5, 0})), from({2}, {1, 0}), 1.0), ValidationError);
  EXPECT_THROW(dice_loss(Var(ones), Tensor({3}), 1.0), ValidationError);
}

TEST(Dice, MatchesReferenceAndGradient) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = random_tensor({2, 1, 3, 4}, rng(), 0.0, 1.0);
    Tensor g = random_tensor({2, 1, 3, 4}, rng(), 0.0, 1.0);
    for (double& v : g.values()) v = v > 0.5 ? 1.0 : 0.0;
    const double smooth = trial % 2 ? 1.0 : 0.0;
    EXPECT_NEAR(dice_loss(Var(p), g, smooth).item(), ref_dice(p, g, smooth), 1e-12);
  }
  ParameterSet ps;
  ps.add("p", random_tensor({1, 1, 4, 4}, 5, 0.2, 0.8));
  Tensor g = random_tensor({1, 1, 4, 4}, 6, 0.0, 1.0);
  for (double& v : g.values()) v = v > 0.5 ? 1.0 : 0.0;
  auto r = netcore::gradient_check(ps, [&] { return dice_loss(ps.at("p").var, g, 1.0); }, {.samples_per_tensor = 16});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Dice, LossMetricDualityOnBinaryInputs) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    Mask p(6, 6), g(6, 6);
    for (auto& v : p.values) v = rng() % 2;
    for (auto& v : g.values) v = rng() % 2;
    if (g.foreground() == 0) g.values[0] = 1;
    Tensor pt({36}), gt({36});
    for (int i = 0; i < 36; ++i) {
      pt[i] = p.values[static_cast<size_t>(i)];
      gt[i] = g.values[static_cast<size_t>(i)];
    }
    EXPECT_NEAR(dice_loss(Var(pt), gt, 0.0).item() + metrics(p, g).dice, 1.0, 1e-12);
  }
}

TEST(Bce, StableExamples) {
  EXPECT_NEAR(bce_loss(Var(Tensor({3})), from({3}, {0, 1, 1})).item(), std::log(2.0), 1e-15);
  const double hi_pos = bce_loss(Var(from({1}, {40})), from({1}, {1})).item();
  EXPECT_GE(hi_pos, 0.0);
  EXPECT_LT(hi_pos, 1e-15);
  EXPECT_NEAR(bce_loss(Var(from({1}, {40})), from({1}, {0})).item(), 40.0, 1e-12);
  EXPECT_NEAR(bce_loss(Var(from({1}, {-800})), from({1}, {1})).item(), 800.0, 1e-9);
  EXPECT_THROW(bce_loss(Var(from({1}, {NAN})), from({1}, {1})), NumericError);
}

TEST(Bce, MatchesReferenceAndGradient) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor z = random_tensor({2, 1, 3, 3}, rng(), -6.0, 6.0);
    Tensor g = random_tensor({2, 1, 3, 3}, rng(), 0.0, 1.0);
    for (double& v : g.values()) v = v > 0.5 ? 1.0 : 0.0;
    EXPECT_NEAR(bce_loss(Var(z), g).item(), ref_bce(z, g), 1e-12);
  }
  ParameterSet ps;
  ps.add("z", random_tensor({1, 1, 5, 5}, 12, -4.0, 4.0));
  Tensor g = random_tensor({1, 1, 5, 5}, 13, 0.0, 1.0);
  for (double& v : g.values()) v = v > 0.5 ? 1.0 : 0.0;
  auto r = netcore::gradient_check(ps, [&] { return bce_loss(ps.at("z").var, g); }, {.samples_per_tensor = 25});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(SegLoss, SumsComponentsAndGradchecksThroughConv) {
  ParameterSet ps;
  netcore::Layer conv("head", netcore::Conv2dSpec{2, 1, 3, 1, 1, 1}, ps, 4);
  const Var x(random_tensor({2, 2, 5, 5}, 14));
  Tensor g = random_tensor({2, 1, 5, 5}, 15, 0.0, 1.0);
  for (double& v : g.values()) v = v > 0.5 ? 1.0 : 0.0;
  SegLoss s = seg_loss(conv(x, {}), g, 1.0);
  EXPECT_DOUBLE_EQ(s.total.item(), s.bce.item() + s.dice.item());
  auto r = netcore::gradient_check(ps, [&] { return seg_loss(conv(x, {}), g, 1.0).total; }, {.samples_per_tensor = 18});
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(TotalLoss, Arithmetic) {
  EXPECT_DOUBLE_EQ(total_loss(1.0, 0.4, 0.5), 1.2);
  EXPECT_DOUBLE_EQ(total_loss(0.7, 123.0, 0.0), 0.7);
  EXPECT_DOUBLE_EQ(total_loss(0.7, 0.0, 0.5), 0.7);
  const Var seg(from({1}, {0.3})), cl(from({1}, {5.0}));
  EXPECT_EQ(total_loss(seg, cl, 0.0).item(), 0.3);
  EXPECT_DOUBLE_EQ(total_loss(seg, cl, 0.5).item(), 2.8);
}

TEST(LossConfig, DefaultsAndValidation) {
  LossConfig c;
  EXPECT_EQ(c.K, 4);
  EXPECT_DOUBLE_EQ(c.beta, 0.5);
  EXPECT_DOUBLE_EQ(c.alpha, 0.2);
  EXPECT_DOUBLE_EQ(c.dice_smooth, 1.0);
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// Independent per-pixel oracle.
Scores oracle_scores(const Mask& p, const Mask& g) {
  double tp = 0, fp = 0, fn = 0;
  for (int64_t r = 0; r < p.height; ++r)
    for (int64_t c = 0; c < p.width; ++c) {
      if (p.at(r, c) == 1 && g.at(r, c) == 1) tp += 1;
      if (p.at(r, c) == 1 && g.at(r, c) == 0) fp += 1;
      if (p.at(r, c) == 0 && g.at(r, c) == 1) fn += 1;
    }
  if (tp + fn == 0) return fp == 0 ? Scores{1, 1, 1, 1, 1} : Scores{};
  Scores s;
  s.dice = 2 * tp / (2 * tp + fp + fn);
  s.iou = tp / (tp + fp + fn);
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp / (tp + fn);
  s.f2 = s.precision + s.recall > 0 ? 5 * s.precision * s.recall / (4 * s.precision + s.recall) : 0.0;
  return s;
}

TEST(Metrics, Examples) {
  Scores s = metrics(mask_of(1, 4, {1, 1, 0, 0}), mask_of(1, 4, {1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(s.dice, 0.5);
  EXPECT_NEAR(s.iou, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f2, 0.5);
  Scores same = metrics(mask_of(1, 3, {1, 0, 1}), mask_of(1, 3, {1, 0, 1}));
  EXPECT_EQ(same.dice, 1.0);
  EXPECT_EQ(same.iou, 1.0);
  EXPECT_EQ(same.f2, 1.0);
  Scores half = metrics(mask_of(1, 4, {1, 1, 0, 0}), mask_of(1, 4, {1, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(half.recall, 1.0);
  EXPECT_DOUBLE_EQ(half.precision, 0.5);
  EXPECT_NEAR(half.f2, 5.0 * 0.5 / 3.0, 1e-15);
}

TEST(Metrics, EmptyMaskConvention) {
  Scores both = metrics(Mask(2, 2), Mask(2, 2));
  EXPECT_EQ(both.dice, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  Scores fp = metrics(mask_of(2, 2, {0, 1, 0, 0}), Mask(2, 2));
  EXPECT_EQ(fp.dice, 0.0);
  EXPECT_EQ(fp.precision, 0.0);
  EXPECT_THROW(metrics(Mask(2, 2), Mask(2, 3)), ValidationError);
}

TEST(Metrics, MatchConfusionOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Mask p(16, 16), g(16, 16);
    for (auto& v : p.values) v = rng() % 3 == 0;
    for (auto& v : g.values) v = rng() % 3 == 0;
    Scores a = metrics(p, g), b = oracle_scores(p, g);
    EXPECT_EQ(a.dice, b.dice);
    EXPECT_EQ(a.iou, b.iou);
    EXPECT_EQ(a.precision, b.precision);
    EXPECT_EQ(a.recall, b.recall);
    EXPECT_NEAR(a.f2, b.f2, 1e-15);
  }
}

TEST(Metrics, F2EqualsDiceWhenPrecisionEqualsRecall) {
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // FP == FN forces precision == recall.
    Confusion c;
    c.tp = 1 + static_cast<int64_t>(rng() % 50);
    c.fp = c.fn = static_cast<int64_t>(rng() % 50);
    Scores s = scores(c);
    ASSERT_DOUBLE_EQ(s.precision, s.recall);
    EXPECT_NEAR(s.f2, s.dice, 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(MetricReport, MeansAndSerialization) {
  MetricReport rep;
  rep.add("a", {1.0, 1.0, 1.0, 1.0, 1.0});
  rep.add("b", {0.5, 0.25, 0.5, 0.5, 0.5});
  Scores m = rep.means();
  EXPECT_DOUBLE_EQ(m.dice, 0.75);
  EXPECT_DOUBLE_EQ(m.iou, 0.625);
  const auto dir = std::filesystem::temp_directory_path() / "clpolyp_metric_report";
  rep.write_csv(dir / "m.csv");
  rep.write_json(dir / "m.json", "synthetic");
  std::ifstream csv(dir / "m.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header, "id,dice,iou,precision,recall,f2");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);
  std::ifstream js(dir / "m.json");
  auto j = nlohmann::json::parse(js);
  EXPECT_DOUBLE_EQ(j["mean"]["dice"].get<double>(), 0.75);
  EXPECT_EQ(j["images"].get<int>(), 2);
  EXPECT_TRUE(j.contains("empty_mask_convention"));
  std::filesystem::remove_all(dir);
}

TEST(ThresholdLogits, ZeroIsForeground) {
  const double z[4] = {-1e-9, 0.0, 3.0, -2.0};
  EXPECT_EQ(threshold_logits(z, 2, 2).values, (std::vector<uint8_t>{0, 1, 1, 0}));
}

}  // namespace
}  // namespace clpolyp::objectives
