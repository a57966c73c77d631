// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clpolyp/model/network.h"
#include "clpolyp/netcore/optim.h"
#include "clpolyp/objectives/metrics.h"
#include "clpolyp/trainer/batch.h"
#include "clpolyp/trainer/config.h"

namespace clpolyp::trainer {

struct StepResult {
  int64_t step = 0;
  double lr = 0.0;
  double bce = 0.0;
  double dice = 0.0;
  double cl = 0.0;
  double total = 0.0;
  /// Tensor shapes seen along the step, in order.
  std::vector<std::pair<std::string, netcore::Shape>> shapes;
};

/// Receives "momentum_forward", "query_forward", "loss", "backward",
/// "adam_step" and "momentum_update" in execution order.
using StepHook = std::function<void(std::string_view phase)>;

/// Model, optimizer state and step counter for one run.
class TrainState {
 public:
  explicit TrainState(const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  model::ClPolypNet& model() { return *model_; }
  const model::ClPolypNet& model() const { return *model_; }
  std::map<std::string, netcore::AdamState>& adam() { return adam_; }
  int64_t global_step = 0;

  /// Parameters, optimizer moments, step counter and the config text.
  netcore::Checkpoint to_checkpoint() const;
  /// ValidationError if the checkpoint was written with a different trajectory.
  void restore(const netcore::Checkpoint& ckpt);

 private:
  TrainConfig config_;
  std::unique_ptr<model::ClPolypNet> model_;
  std::map<std::string, netcore::AdamState> adam_;
};

/// `probe` stops after the backward pass: no optimizer or momentum update.
enum class StepKind { update, probe };

/// One optimization step on a prepared batch at global step `step` of `total_steps`.
/// NumericError with step, loss components and lr on a non-finite loss.
StepResult train_step(TrainState& state, const TripletBatch& batch, int64_t step, int64_t total_steps,
                      const StepHook& hook = {}, StepKind kind = StepKind::update);

/// Inference-mode metrics for every sample of `store`.
objectives::MetricReport evaluate(const model::ClPolypNet& net, const SampleStore& store);

struct RunResult {
  std::vector<StepResult> steps;  // steps executed by this invocation
  std::filesystem::path last_checkpoint;
  std::map<std::string, objectives::MetricReport> reports;  // by test set name
  bool completed = false;
};

/// Training loop with logging, periodic checkpoints, resume and final evaluation.
/// `train_samples` / `test_samples` bypass disk loading when provided.
class Runner {
 public:
  explicit Runner(TrainConfig config);
  /// In-memory data instead of manifests.
  Runner(TrainConfig config, std::vector<data::ImageSample> train, std::map<std::string, std::vector<data::ImageSample>> tests);

  void set_step_hook(StepHook hook) { hook_ = std::move(hook); }
  RunResult run();
  /// One forward/backward pass without a parameter update; returns a printable shape walk.
  std::string dry_run();

  TrainState& state() { return *state_; }
  int64_t steps_per_epoch() const;
  int64_t total_steps() const { return steps_per_epoch() * config_.epochs; }

 private:
  void prepare_data();
  std::vector<size_t> epoch_order(int64_t epoch) const;
  TripletBatch batch_for_step(int64_t step) const;

  TrainConfig config_;
  std::vector<data::DatasetManifest> manifests_;  // train first, then tests
  std::unique_ptr<SampleStore> train_;
  std::map<std::string, std::unique_ptr<SampleStore>> tests_;
  TaxonomyIndex index_;
  BatchRecipe recipe_;
  std::unique_ptr<TrainState> state_;
  StepHook hook_;
};

/// Reads `CLPOLYP_NUM_WORKERS` (default 1, clamped to [1, 64]).
int num_workers_from_env();

}  // namespace clpolyp::trainer
