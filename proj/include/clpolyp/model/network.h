// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clpolyp/model/encoder.h"
#include "clpolyp/model/heads.h"
#include "clpolyp/netcore/checkpoint.h"

namespace clpolyp::model {

/// θ_k ← m·θ_k + (1−m)·θ_q for every parameter. Buffers are left alone.
/// ValidationError naming the first differing path on structural mismatch.
void momentum_update(ParameterSet& target, const ParameterSet& source, double m);

/// Max-norm distance between two structurally identical sets.
double max_abs_difference(const ParameterSet& a, const ParameterSet& b);

/// Segmentation network plus the optional contrastive branch.
///
/// Parameter groups and their checkpoint prefixes:
///   query_encoder/        backbone that feeds the decoder
///   projection/           query projection head
///   momentum_encoder/     EMA copy of the backbone (frozen)
///   momentum_encoder/projection/  EMA copy of the projection head (frozen)
///   decoder/              context module, skip fusion, output conv
/// Without the contrastive branch the last three groups are empty.
class ClPolypNet {
 public:
  ClPolypNet(NetworkSpec spec, uint64_t seed);
  ClPolypNet(const ClPolypNet&) = delete;
  ClPolypNet& operator=(const ClPolypNet&) = delete;

  const NetworkSpec& spec() const { return spec_; }

  ParameterSet& query_encoder() { return query_encoder_; }
  ParameterSet& projection() { return projection_; }
  ParameterSet& momentum_encoder() { return momentum_encoder_; }
  ParameterSet& momentum_projection() { return momentum_projection_; }
  ParameterSet& decoder() { return decoder_; }
  const ParameterSet& query_encoder() const { return query_encoder_; }
  const ParameterSet& projection() const { return projection_; }
  const ParameterSet& momentum_encoder() const { return momentum_encoder_; }
  const ParameterSet& momentum_projection() const { return momentum_projection_; }
  const ParameterSet& decoder() const { return decoder_; }

  /// Trainable groups with their checkpoint prefixes.
  std::vector<std::pair<std::string, ParameterSet*>> trainable_groups();
  /// Every group with its checkpoint prefix.
  std::vector<std::pair<std::string, ParameterSet*>> all_groups();

  EncoderFeatures encode(const Var& images, const ForwardContext& ctx) const;
  Var project(const Var& pooled, const ForwardContext& ctx) const;
  /// Unit embeddings from the momentum branch; never records a graph.
  netcore::Tensor momentum_embed(const netcore::Tensor& images) const;

  Var context(const Var& f5, const ForwardContext& ctx) const;
  Var decode(const Var& fused, const Var& f2, const ForwardContext& ctx) const;
  /// Logits B×1×H×W.
  Var segment(const Var& images, const ForwardContext& ctx) const;

  const ContextModule& context_module() const { return context_; }
  const Decoder& decoder_module() const { return decoder_head_; }

  /// EMA step with the configured momentum.
  void momentum_update();

  /// Names of the modules present in the graph, e.g. "aspp", "maspp_se", "ca", "projection".
  std::vector<std::string> module_names() const;

  void save_to(netcore::Checkpoint& ckpt) const;
  void load_from(const netcore::Checkpoint& ckpt);

 private:
  NetworkSpec spec_;
  ParameterSet query_encoder_, projection_, momentum_encoder_, momentum_projection_, decoder_;
  Encoder encoder_;
  std::optional<Encoder> momentum_encoder_net_;
  ProjectionHead projection_head_, momentum_projection_head_;
  ContextModule context_;
  Decoder decoder_head_;
};

}  // namespace clpolyp::model
