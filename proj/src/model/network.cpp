// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/model/network.h"

#include <cmath>

#include <spdlog/spdlog.h>

#include "clpolyp/errors.h"

namespace clpolyp::model {

using namespace netcore;

namespace {

uint64_t group_seed(uint64_t seed, std::string_view group) { return seed ^ fnv1a(group); }

}  // namespace

void momentum_update(ParameterSet& target, const ParameterSet& source, double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw ValidationError("momentum must lie in [0,1], got " + std::to_string(m));
  const std::string diff = target.first_structural_difference(source);
  if (!diff.empty()) throw ValidationError("momentum update: parameter sets differ at '" + diff + "'");
  for (auto& [name, p] : target.params()) {
    Tensor& k = p.var.mutable_value();
    const Tensor& q = source.at(name).var.value();
    for (int64_t i = 0; i < k.numel(); ++i) k[i] = m * k[i] + (1.0 - m) * q[i];
  }
}

double max_abs_difference(const ParameterSet& a, const ParameterSet& b) {
  const std::string diff = a.first_structural_difference(b);
  if (!diff.empty()) throw ValidationError("parameter sets differ at '" + diff + "'");
  double worst = 0.0;
  for (const auto& [name, p] : a.params()) {
    const Tensor& x = p.var.value();
    const Tensor& y = b.at(name).var.value();
    for (int64_t i = 0; i < x.numel(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  }
  return worst;
}

ClPolypNet::ClPolypNet(NetworkSpec spec, uint64_t seed)
    : spec_(std::move(spec)), encoder_((spec_.validate(), spec_), query_encoder_, group_seed(seed, "encoder")) {
  if (!spec_.backbone_weights.empty()) {
    if (std::filesystem::exists(spec_.backbone_weights)) {
      const size_t n = load_backbone_weights(query_encoder_, spec_.backbone_weights);
      spdlog::info("loaded {} backbone tensors from {}", n, spec_.backbone_weights);
    } else {
      spdlog::warn("backbone weights '{}' not found; using random initialization", spec_.backbone_weights);
    }
  }
  context_ = ContextModule(spec_, decoder_, group_seed(seed, "decoder"));
  decoder_head_ = Decoder(spec_, decoder_, group_seed(seed, "decoder"));
  if (!spec_.use_cl_branch) return;
  const int64_t c5 = spec_.high_level_channels();
  projection_head_ = ProjectionHead(c5, spec_.projection_dim, spec_.projection_dim, projection_,
                                    group_seed(seed, "projection"));
  momentum_encoder_net_.emplace(spec_, momentum_encoder_, group_seed(seed, "encoder"));
  momentum_projection_head_ = ProjectionHead(c5, spec_.projection_dim, spec_.projection_dim, momentum_projection_,
                                             group_seed(seed, "projection"));
  momentum_encoder_.copy_from(query_encoder_);
  momentum_projection_.copy_from(projection_);
  momentum_encoder_.set_trainable(false);
  momentum_projection_.set_trainable(false);
}

std::vector<std::pair<std::string, ParameterSet*>> ClPolypNet::trainable_groups() {
  std::vector<std::pair<std::string, ParameterSet*>> g{{"query_encoder/", &query_encoder_}};
  if (spec_.use_cl_branch) g.emplace_back("projection/", &projection_);
  g.emplace_back("decoder/", &decoder_);
  return g;
}

std::vector<std::pair<std::string, ParameterSet*>> ClPolypNet::all_groups() {
  auto g = trainable_groups();
  if (spec_.use_cl_branch) {
    g.emplace_back("momentum_encoder/", &momentum_encoder_);
    g.emplace_back("momentum_encoder/projection/", &momentum_projection_);
  }
  return g;
}

EncoderFeatures ClPolypNet::encode(const Var& images, const ForwardContext& ctx) const { return encoder_(images, ctx); }

Var ClPolypNet::project(const Var& pooled, const ForwardContext& ctx) const {
  if (!spec_.use_cl_branch) throw ConfigError("projection head is disabled (use_cl_branch=false)");
  return projection_head_(pooled, ctx);
}

Tensor ClPolypNet::momentum_embed(const Tensor& images) const {
  if (!spec_.use_cl_branch) throw ConfigError("momentum encoder is disabled (use_cl_branch=false)");
  NoGradGuard no_grad;
  const ForwardContext ctx{true, false};
  const Var pooled = (*momentum_encoder_net_)(Var(images), ctx).pooled;
  return momentum_projection_head_(pooled, ctx).value();
}

Var ClPolypNet::context(const Var& f5, const ForwardContext& ctx) const { return context_(f5, ctx); }

Var ClPolypNet::decode(const Var& fused, const Var& f2, const ForwardContext& ctx) const {
  return decoder_head_(fused, f2, ctx);
}

Var ClPolypNet::segment(const Var& images, const ForwardContext& ctx) const {
  EncoderFeatures f = encode(images, ctx);
  Var fused = context(f.f5, ctx);
  f.f5 = Var();
  return decode(fused, f.f2, ctx);
}

void ClPolypNet::momentum_update() {
  if (!spec_.use_cl_branch) return;
  model::momentum_update(momentum_encoder_, query_encoder_, spec_.momentum);
  model::momentum_update(momentum_projection_, projection_, spec_.momentum);
}

std::vector<std::string> ClPolypNet::module_names() const {
  std::vector<std::string> m{"encoder", "aspp"};
  if (spec_.use_maspp) m.insert(m.end(), {"maspp_plain", "maspp_se"});
  m.push_back(spec_.use_ca ? "ca" : "skip_concat");
  m.push_back("outconv");
  if (spec_.use_cl_branch) m.insert(m.end(), {"projection", "momentum_encoder", "momentum_projection"});
  return m;
}

void ClPolypNet::save_to(Checkpoint& ckpt) const {
  export_parameters(query_encoder_, "query_encoder/", ckpt);
  export_parameters(decoder_, "decoder/", ckpt);
  if (!spec_.use_cl_branch) return;
  export_parameters(projection_, "projection/", ckpt);
  export_parameters(momentum_encoder_, "momentum_encoder/", ckpt);
  export_parameters(momentum_projection_, "momentum_encoder/projection/", ckpt);
}

void ClPolypNet::load_from(const Checkpoint& ckpt) {
  for (auto& [prefix, set] : all_groups()) import_parameters(*set, prefix, ckpt, false);
}

}  // namespace clpolyp::model
