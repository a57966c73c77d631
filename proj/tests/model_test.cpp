// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "clpolyp/errors.h"
#include "clpolyp/model/network.h"
#include "clpolyp/netcore/gradcheck.h"
#include "clpolyp/objectives/losses.h"
#include "test_util.h"

namespace clpolyp::model {
namespace {

using netcore::Tensor;
using testing::random_tensor;

NetworkSpec tiny_at(int64_t size) {
  NetworkSpec s = NetworkSpec::tiny();
  s.input_height = s.input_width = size;
  return s;
}

bool has_prefix(const ParameterSet& ps, const std::string& prefix) {
  for (const auto& n : ps.names())
    if (n.rfind(prefix, 0) == 0) return true;
  return false;
}

TEST(Encoder, TinyShapes) {
  ClPolypNet net(tiny_at(64), 1);
  EncoderFeatures f = net.encode(Var(random_tensor({2, 3, 64, 64}, 1)), {});
  EXPECT_EQ(f.f2.shape(), (netcore::Shape{2, 32, 16, 16}));
  EXPECT_EQ(f.f5.shape(), (netcore::Shape{2, 128, 4, 4}));
  EXPECT_EQ(f.pooled.shape(), (netcore::Shape{2, 128}));
  EXPECT_EQ(net.segment(Var(random_tensor({2, 3, 64, 64}, 2)), {}).shape(), (netcore::Shape{2, 1, 64, 64}));
}

TEST(Encoder, ResNet50WidthsAndStrides) {
  NetworkSpec s = NetworkSpec::resnet50();
  s.input_height = s.input_width = 64;
  s.use_cl_branch = false;
  ClPolypNet net(s, 1);
  // torchvision resnet50 without the classifier.
  EXPECT_EQ(net.query_encoder().element_count(), 23508032);
  EXPECT_TRUE(net.query_encoder().contains("layer1/0/downsample/0/weight"));
  EXPECT_TRUE(net.query_encoder().contains("layer4/2/conv3/weight"));
  netcore::NoGradGuard ng;
  EncoderFeatures f = net.encode(Var(random_tensor({2, 3, 64, 64}, 3)), {});
  EXPECT_EQ(f.f2.shape(), (netcore::Shape{2, 256, 16, 16}));
  EXPECT_EQ(f.f5.shape(), (netcore::Shape{2, 2048, 4, 4}));
  EXPECT_EQ(f.pooled.shape(), (netcore::Shape{2, 2048}));
}

TEST(Encoder, WrongInputShapeRejected) {
  ClPolypNet net(tiny_at(64), 1);
  EXPECT_THROW(net.encode(Var(random_tensor({1, 3, 32, 32}, 1)), {}), ShapeError);
  EXPECT_THROW(net.encode(Var(random_tensor({1, 1, 64, 64}, 1)), {}), ShapeError);
}

TEST(Spec, Validation) {
  NetworkSpec s = tiny_at(60);
  EXPECT_THROW(s.validate(), ConfigError);
  s = tiny_at(64);
  s.maspp_channels = 40;
  EXPECT_THROW(ClPolypNet(s, 0), ConfigError);
  s.use_maspp = false;
  EXPECT_NO_THROW(ClPolypNet(s, 0));
  s = tiny_at(64);
  s.momentum = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(parse_backbone("resnet50"), Backbone::resnet50);
  EXPECT_THROW(parse_backbone("vgg"), ConfigError);
}

TEST(Projection, UnitNormOutput) {
  ClPolypNet net(tiny_at(64), 2);
  Var h = net.project(Var(random_tensor({4, 128}, 4)), {});
  ASSERT_EQ(h.shape(), (netcore::Shape{4, 128}));
  for (int64_t b = 0; b < 4; ++b) {
    double n = 0;
    for (int64_t d = 0; d < 128; ++d) n += h.value()[b * 128 + d] * h.value()[b * 128 + d];
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
  }
  NetworkSpec big = NetworkSpec::resnet50();
  EXPECT_EQ(big.projection_dim, 2048);
}

TEST(Projection, ZeroPreNormalizationRaises) {
  ClPolypNet net(tiny_at(64), 2);
  // Batch of one: batch norm outputs its shift (0), fc2 bias is 0.
  EXPECT_THROW(net.project(Var(random_tensor({1, 128}, 4)), {}), NumericError);
}

TEST(Maspp, PreservesSpatialSizeAndSeGateHalfAtZero) {
  NetworkSpec s = NetworkSpec::tiny();
  s.input_height = s.input_width = 384;
  ClPolypNet net(s, 3);
  const Var f5(random_tensor({2, 128, 24, 24}, 5));
  EXPECT_EQ(net.context(f5, {}).shape(), (netcore::Shape{2, 64, 24, 24}));
  ParameterSet& d = net.decoder();
  d.at("maspp/se/fc2/weight").var.mutable_value().fill(0.0);
  d.at("maspp/se/fc2/bias").var.mutable_value().fill(0.0);
  Var gate = net.context_module().se()->gate(Var(random_tensor({2, 64, 3, 3}, 6)), {});
  for (double v : gate.value().values()) EXPECT_EQ(v, 0.5);
}

TEST(Ablation, FlagsControlModules) {
  NetworkSpec s = tiny_at(64);
  s.use_maspp = s.use_ca = s.use_cl_branch = false;
  ClPolypNet base(s, 1);
  EXPECT_FALSE(has_prefix(base.decoder(), "maspp/"));
  EXPECT_FALSE(has_prefix(base.decoder(), "ca/"));
  EXPECT_TRUE(has_prefix(base.decoder(), "aspp/"));
  EXPECT_TRUE(has_prefix(base.decoder(), "skip/"));
  EXPECT_TRUE(base.projection().empty());
  EXPECT_TRUE(base.momentum_encoder().empty());
  EXPECT_TRUE(base.momentum_projection().empty());
  EXPECT_THROW(base.project(Var(Tensor({2, 128})), {}), ConfigError);
  auto mods = base.module_names();
  EXPECT_EQ(std::count(mods.begin(), mods.end(), "maspp_se"), 0);
  EXPECT_EQ(std::count(mods.begin(), mods.end(), "projection"), 0);

  ClPolypNet full(tiny_at(64), 1);
  EXPECT_TRUE(has_prefix(full.decoder(), "maspp/se/"));
  EXPECT_TRUE(has_prefix(full.decoder(), "ca/"));
  EXPECT_FALSE(has_prefix(full.decoder(), "skip/"));
  EXPECT_FALSE(full.projection().empty());
  // Shared names get identical initial values regardless of the toggles.
  EXPECT_EQ(base.query_encoder().at("stage1/down/conv/weight").var.value(),
            full.query_encoder().at("stage1/down/conv/weight").var.value());
  EXPECT_EQ(base.decoder().at("aspp/b1/conv/weight").var.value(), full.decoder().at("aspp/b1/conv/weight").var.value());
}

TEST(SkipFusion, ZeroInputsAndZeroWeightsGiveZero) {
  ClPolypNet net(tiny_at(64), 4);
  for (auto& [name, p] : net.decoder().params())
    if (name.rfind("ca/", 0) == 0) p.var.mutable_value().fill(0.0);
  Var f2(Tensor({2, 32, 16, 16})), z(Tensor({2, 64, 16, 16}));
  const Var out = net.decoder_module().fusion()(f2, z, {});
  EXPECT_EQ(out.shape(), (netcore::Shape{2, 32, 16, 16}));
  EXPECT_EQ(out.value().max_abs(), 0.0);
  EXPECT_THROW(net.decoder_module().fusion()(f2, Var(Tensor({2, 64, 8, 8})), {}), ShapeError);
}

TEST(Decoder, UpsamplesTwice) {
  NetworkSpec s = tiny_at(384);
  ClPolypNet net(s, 5);
  netcore::NoGradGuard ng;
  Var logits = net.decode(Var(random_tensor({1, 64, 24, 24}, 7)), Var(random_tensor({1, 32, 96, 96}, 8)), {false});
  EXPECT_EQ(logits.shape(), (netcore::Shape{1, 1, 384, 384}));
}

TEST(Momentum, InitCopyAndEndpoints) {
  ClPolypNet net(tiny_at(64), 6);
  EXPECT_EQ(max_abs_difference(net.momentum_encoder(), net.query_encoder()), 0.0);
  EXPECT_EQ(max_abs_difference(net.momentum_projection(), net.projection()), 0.0);
  for (const auto& [n, p] : net.momentum_encoder().params()) EXPECT_FALSE(p.trainable) << n;

  ParameterSet k, q;
  k.add("w", Tensor({3}, 1.0));
  q.add("w", Tensor({3}, 0.0));
  momentum_update(k, q, 0.99);
  for (double v : k.at("w").var.value().values()) EXPECT_DOUBLE_EQ(v, 0.99);
  const Tensor before = k.at("w").var.value();
  momentum_update(k, q, 1.0);
  EXPECT_EQ(k.at("w").var.value(), before);
  q.at("w").var.mutable_value() = random_tensor({3}, 9);
  momentum_update(k, q, 0.0);
  EXPECT_EQ(k.at("w").var.value(), q.at("w").var.value());
  EXPECT_THROW(momentum_update(k, q, 1.1), ValidationError);
}

TEST(Momentum, GeometricContraction) {
  ParameterSet k, q;
  k.add("a", random_tensor({4, 5}, 1));
  q.add("a", random_tensor({4, 5}, 2));
  for (double m : {0.5, 0.9, 0.999}) {
    double prev = max_abs_difference(k, q);
    for (int step = 0; step < 20; ++step) {
      momentum_update(k, q, m);
      const double now = max_abs_difference(k, q);
      EXPECT_NEAR(now, m * prev, 1e-12);
      prev = now;
    }
  }
}

TEST(Momentum, StructuralMismatchNamesPath) {
  ParameterSet k, q;
  k.add("enc/a", Tensor({2}));
  q.add("enc/a", Tensor({3}));
  try {
    momentum_update(k, q, 0.5);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("enc/a"), std::string::npos);
  }
}

TEST(Checkpointing, SaveLoadRoundTrip) {
  ClPolypNet a(tiny_at(64), 7), b(tiny_at(64), 8);
  netcore::Checkpoint ck;
  a.save_to(ck);
  EXPECT_TRUE(ck.tensors.count("momentum_encoder/projection/fc1/weight"));
  EXPECT_TRUE(ck.tensors.count("query_encoder/stage4/block/bn2/running_var"));
  b.load_from(ck);
  EXPECT_EQ(max_abs_difference(a.decoder(), b.decoder()), 0.0);
  EXPECT_EQ(max_abs_difference(a.momentum_projection(), b.momentum_projection()), 0.0);
}

TEST(BackboneWeights, NameMappedLoad) {
  ClPolypNet net(tiny_at(64), 9);
  netcore::Checkpoint ck;
  ck.tensors["stage1.down.conv.weight"] = Tensor({16, 3, 3, 3}, 0.25);
  ck.tensors["stage1.down.bn.running_mean"] = Tensor({16}, 2.0);
  ck.tensors["fc.weight"] = Tensor({10, 128});
  ck.tensors["unrelated"] = Tensor({1});
  const auto path = std::filesystem::temp_directory_path() / "clpolyp_backbone.ckpt";
  netcore::write_checkpoint(path, ck);
  EXPECT_EQ(load_backbone_weights(net.query_encoder(), path), 2u);
  EXPECT_EQ(net.query_encoder().at("stage1/down/conv/weight").var.value()[5], 0.25);
  EXPECT_EQ(net.query_encoder().buffer("stage1/down/bn/running_mean")[3], 2.0);
  ck.tensors["stage1.down.conv.weight"] = Tensor({16, 3, 1, 1});
  netcore::write_checkpoint(path, ck);
  EXPECT_THROW(load_backbone_weights(net.query_encoder(), path), ValidationError);
  std::filesystem::remove(path);

  NetworkSpec s = tiny_at(64);
  s.backbone_weights = "/nonexistent/weights.ckpt";
  EXPECT_NO_THROW(ClPolypNet(s, 1));
}

TEST(GradCheck, TinyNetworkEndToEnd) {
  NetworkSpec s = tiny_at(64);
  s.use_cl_branch = false;
  ClPolypNet net(s, 10);
  const Var x(random_tensor({2, 3, 64, 64}, 11));
  Tensor g = random_tensor({2, 1, 64, 64}, 12, 0.0, 1.0);
  for (double& v : g.values()) v = v > 0.6 ? 1.0 : 0.0;
  const netcore::ForwardContext ctx{true, false};
  auto loss = [&] { return objectives::seg_loss(net.segment(x, ctx), g, 1.0).total; };
  for (auto& [prefix, set] : net.trainable_groups()) {
    auto r = netcore::gradient_check(*set, loss, {.samples_per_tensor = 2, .seed = 3});
    EXPECT_LT(r.max_relative_error, 1e-3) << prefix << r.worst_parameter;
  }
}

}  // namespace
}  // namespace clpolyp::model
