// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/trainer/trainer.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "clpolyp/errors.h"
#include "clpolyp/objectives/losses.h"

namespace clpolyp::trainer {

using netcore::Checkpoint;
using netcore::Shape;
using netcore::Tensor;
using netcore::Var;

namespace {

constexpr uint64_t kModelStream = 0x6d6f64656cULL;
constexpr uint64_t kOrderStream = 0x6f72646572ULL;
constexpr uint64_t kBatchStream = 0x6261746368ULL;

// Momentum embeddings for the negatives, one batch-sized chunk per negative
// slot so batch statistics are taken over B images like the query pass.
Tensor embed_negatives(const model::ClPolypNet& net, const Tensor& negatives, int64_t B, int64_t K) {
  const int64_t plane = negatives.numel() / (B * K);
  Tensor out;
  for (int64_t j = 0; j < K; ++j) {
    Shape cs = negatives.shape();
    cs[0] = B;
    Tensor chunk(cs);
    for (int64_t b = 0; b < B; ++b) {
      std::copy_n(negatives.data() + (b * K + j) * plane, plane, chunk.data() + b * plane);
    }
    const Tensor e = net.momentum_embed(chunk);
    const int64_t D = e.dim(1);
    if (j == 0) out = Tensor({B * K, D});
    for (int64_t b = 0; b < B; ++b) std::copy_n(e.data() + b * D, D, out.data() + (b * K + j) * D);
  }
  return out;
}

std::string fmt_row(const StepResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(r.step), r.lr, r.bce,
                r.dice, r.cl, r.total);
  return buf;
}

constexpr const char* kLogHeader = "step,lr,L_BCE,L_Dice,L_CL,L_Total\n";

}  // namespace

int num_workers_from_env() {
  const char* v = std::getenv("CLPOLYP_NUM_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("CLPOLYP_NUM_WORKERS must be a positive integer, got '") + v + "'");
  return static_cast<int>(std::min<long>(n, 64));
}

TrainState::TrainState(const TrainConfig& config)
    : config_(config), model_(std::make_unique<model::ClPolypNet>(config.network, mix_seed({config.seed, kModelStream}))) {}

Checkpoint TrainState::to_checkpoint() const {
  Checkpoint ck;
  model_->save_to(ck);
  for (const auto& [prefix, st] : adam_) netcore::export_adam_state(st, "adam/" + prefix, ck);
  ck.metadata["global_step"] = global_step;
  ck.metadata["config"] = config_.to_text();
  ck.metadata["trajectory_hash"] = std::to_string(config_.trajectory_hash());
  return ck;
}

void TrainState::restore(const Checkpoint& ck) {
  if (!ck.metadata.contains("trajectory_hash") || !ck.metadata.contains("global_step")) {
    throw ValidationError("checkpoint lacks training metadata");
  }
  if (ck.metadata["trajectory_hash"].get<std::string>() != std::to_string(config_.trajectory_hash())) {
    throw ValidationError("checkpoint was written by a run with a different training configuration");
  }
  model_->load_from(ck);
  adam_.clear();
  for (auto& [prefix, set] : model_->trainable_groups()) adam_[prefix] = netcore::import_adam_state("adam/" + prefix, ck);
  global_step = ck.metadata["global_step"].get<int64_t>();
}

StepResult train_step(TrainState& state, const TripletBatch& batch, int64_t step, int64_t total_steps,
                      const StepHook& hook, StepKind kind) {
  auto phase = [&](std::string_view p) {
    if (hook) hook(p);
  };
  const TrainConfig& cfg = state.config();
  model::ClPolypNet& net = state.model();
  const bool cl = cfg.network.use_cl_branch;
  const int64_t B = batch.anchors.dim(0);
  const netcore::ForwardContext ctx{true, true};
  StepResult r;
  r.step = step;
  r.lr = netcore::cosine_lr(static_cast<double>(step), static_cast<double>(total_steps), cfg.lr0);
  auto note = [&](const char* what, const Shape& s) { r.shapes.emplace_back(what, s); };

  Tensor positives, negatives;
  if (cl) {
    phase("momentum_forward");
    positives = net.momentum_embed(batch.positives);
    negatives = embed_negatives(net, batch.negatives, B, cfg.loss.K);
    note("positive_embedding", positives.shape());
    note("negative_embeddings", negatives.shape());
  }

  phase("query_forward");
  note("input", batch.anchors.shape());
  model::EncoderFeatures f = net.encode(Var(batch.anchors), ctx);
  note("f2", f.f2.shape());
  note("f5", f.f5.shape());
  note("pooled", f.pooled.shape());
  Var h;
  if (cl) {
    h = net.project(f.pooled, ctx);
    note("embedding", h.shape());
  }
  f.pooled = Var();
  Var fused = net.context(f.f5, ctx);
  note("context", fused.shape());
  f.f5 = Var();
  Var logits = net.decode(fused, f.f2, ctx);
  fused = Var();
  f.f2 = Var();
  note("logits", logits.shape());

  phase("loss");
  objectives::SegLoss seg = objectives::seg_loss(logits, batch.masks, cfg.loss.dice_smooth);
  logits = Var();
  Var total = seg.total;
  if (cl) {
    Var cl_loss = objectives::triplet_loss(h, positives, negatives, cfg.loss.K, cfg.loss.alpha);
    r.cl = cl_loss.item();
    total = objectives::total_loss(seg.total, cl_loss, cfg.loss.beta);
  }
  r.bce = seg.bce.item();
  r.dice = seg.dice.item();
  r.total = total.item();
  if (!std::isfinite(r.total) || !std::isfinite(r.bce) || !std::isfinite(r.dice) || !std::isfinite(r.cl)) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "non-finite loss at step %lld: L_BCE=%g L_Dice=%g L_CL=%g L_Total=%g lr=%g",
                  static_cast<long long>(step), r.bce, r.dice, r.cl, r.total, r.lr);
    throw NumericError(buf);
  }

  phase("backward");
  auto groups = net.trainable_groups();
  for (auto& [prefix, set] : groups) set->zero_grad();
  total.backward();
  if (kind == StepKind::probe) return r;

  phase("adam_step");
  for (auto& [prefix, set] : groups) netcore::adam_step(*set, state.adam()[prefix], r.lr, step + 1);

  phase("momentum_update");
  net.momentum_update();
  return r;
}

objectives::MetricReport evaluate(const model::ClPolypNet& net, const SampleStore& store) {
  if (store.size() == 0) throw ValidationError("evaluate: empty test set");
  netcore::NoGradGuard no_grad;
  const netcore::ForwardContext ctx{false, false};
  objectives::MetricReport report;
  for (size_t i = 0; i < store.size(); ++i) {
    auto s = store.get(i);
    const data::Image img = augment::normalize_image(s->image);
    const Tensor x = data::images_to_tensor(std::span(&img, 1));
    const Var logits = net.segment(Var(x), ctx);
    const data::Mask pred = objectives::threshold_logits(logits.value().data(), s->mask.height, s->mask.width);
    if (s->mask.foreground() == 0) report.note_empty_truth();
    report.add(s->id, objectives::metrics(pred, s->mask));
  }
  return report;
}

Runner::Runner(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  prepare_data();
  state_ = std::make_unique<TrainState>(config_);
}

Runner::Runner(TrainConfig config, std::vector<data::ImageSample> train,
               std::map<std::string, std::vector<data::ImageSample>> tests)
    : config_(std::move(config)) {
  if (config_.data_roots.empty() && config_.train_manifest.empty()) config_.data_roots = {"<memory>"};
  config_.validate();
  train_ = std::make_unique<SampleStore>(std::move(train));
  for (auto& [name, samples] : tests) tests_[name] = std::make_unique<SampleStore>(std::move(samples));
  prepare_data();
  state_ = std::make_unique<TrainState>(config_);
}

void Runner::prepare_data() {
  const data::Size2 size{config_.network.input_height, config_.network.input_width};
  if (!train_) {
    data::DatasetManifest train;
    std::vector<data::DatasetManifest> tests;
    if (!config_.train_manifest.empty()) {
      train = data::read_manifest(config_.train_manifest, data::Split::train);
      for (const auto& p : config_.test_manifests) tests.push_back(data::read_manifest(p, data::Split::test));
    } else {
      std::vector<data::DatasetManifest> sources;
      for (const auto& root : config_.data_roots) sources.push_back(data::scan_dataset(root));
      data::ScenarioSplit split = data::make_scenario_split(sources, config_.scenario, config_.seed);
      train = std::move(split.train);
      tests = std::move(split.tests);
    }
    for (const auto& root : config_.extra_test_roots) {
      data::DatasetManifest m = data::scan_dataset(root);
      m.split = data::Split::test;
      tests.push_back(std::move(m));
    }
    manifests_.clear();
    manifests_.push_back(train);
    for (const auto& t : tests) manifests_.push_back(t);
    train_ = std::make_unique<SampleStore>(std::move(train), size);
    for (auto& t : tests) {
      const std::string name = t.name.empty() ? "test" + std::to_string(tests_.size()) : t.name;
      tests_[name] = std::make_unique<SampleStore>(std::move(t), size, 0);
    }
  }
  if (steps_per_epoch() == 0) {
    throw ConfigError("training set has " + std::to_string(train_->size()) + " samples, fewer than batch_size " +
                      std::to_string(config_.batch_size));
  }
  recipe_.joint = augment::preset(config_.augment_preset, augment::Mode::joint);
  recipe_.image_only = augment::preset(config_.augment_preset, augment::Mode::image_only);
  recipe_.K = config_.loss.K;
  recipe_.contrastive = config_.network.use_cl_branch;
  if (recipe_.contrastive) index_ = build_taxonomy_index(*train_, config_.thresholds);
}

int64_t Runner::steps_per_epoch() const {
  return train_ ? static_cast<int64_t>(train_->size()) / config_.batch_size : 0;
}

std::vector<size_t> Runner::epoch_order(int64_t epoch) const {
  std::vector<size_t> order(train_->size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(mix_seed({config_.seed, kOrderStream, static_cast<uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TripletBatch Runner::batch_for_step(int64_t step) const {
  const int64_t spe = steps_per_epoch();
  const std::vector<size_t> order = epoch_order(step / spe);
  const auto first = static_cast<size_t>((step % spe) * config_.batch_size);
  const std::span<const size_t> idx(order.data() + first, static_cast<size_t>(config_.batch_size));
  return build_batch(*train_, index_, recipe_, idx, mix_seed({config_.seed, kBatchStream, static_cast<uint64_t>(step)}));
}

RunResult Runner::run() {
  namespace fs = std::filesystem;
  const fs::path dir = config_.run_dir();
  fs::create_directories(dir / "checkpoints");
  {
    std::ofstream cfg(dir / "config.cfg");
    cfg << config_.to_text();
  }
  if (!manifests_.empty()) {
    fs::create_directories(dir / "manifests");
    for (size_t i = 0; i < manifests_.size(); ++i) {
      const std::string n = i == 0 ? "train" : "test_" + (manifests_[i].name.empty() ? std::to_string(i) : manifests_[i].name);
      data::write_manifest(dir / "manifests" / (n + ".tsv"), manifests_[i]);
    }
  }
  TrainState& st = *state_;
  if (!config_.resume.empty()) {
    const fs::path ck = config_.resume == "latest" ? dir / "checkpoints" / "last.ckpt" : fs::path(config_.resume);
    st.restore(netcore::read_checkpoint(ck));
    spdlog::info("resumed from {} at step {}", ck.string(), st.global_step);
  }

  // Keep log rows strictly before the resume point so a resumed run rewrites the tail.
  const fs::path log_path = dir / "train_log.csv";
  {
    std::vector<std::string> keep;
    if (st.global_step > 0 && fs::exists(log_path)) {
      std::ifstream in(log_path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoll(line.substr(0, line.find(','))) < st.global_step) keep.push_back(line);
      }
    }
    std::ofstream out(log_path, std::ios::trunc);
    out << kLogHeader;
    for (const auto& l : keep) out << l << "\n";
    if (!out) throw IoError("cannot write " + log_path.string());
  }
  std::ofstream log(log_path, std::ios::app);

  RunResult result;
  const int64_t spe = steps_per_epoch(), T = total_steps();
  const int workers = num_workers_from_env();
  std::deque<std::future<TripletBatch>> ahead;
  int64_t next_to_queue = st.global_step;
  auto stop_at = [&] { return config_.max_steps > 0 ? std::min(T, config_.max_steps) : T; };
  const int64_t last_step = stop_at();
  auto save = [&](const fs::path& p) {
    netcore::write_checkpoint(p, st.to_checkpoint());
    result.last_checkpoint = p;
  };

  double epoch_total = 0.0;
  for (int64_t t = st.global_step; t < last_step; ++t) {
    TripletBatch batch;
    if (workers > 1) {
      while (next_to_queue < last_step && static_cast<int64_t>(ahead.size()) < workers) {
        const int64_t s = next_to_queue++;
        ahead.push_back(std::async(std::launch::async, [this, s] { return batch_for_step(s); }));
      }
      batch = ahead.front().get();
      ahead.pop_front();
    } else {
      batch = batch_for_step(t);
    }
    StepResult r = train_step(st, batch, t, T, hook_);
    log << fmt_row(r) << std::flush;
    if (!log) throw IoError("cannot append to " + log_path.string());
    epoch_total += r.total;
    st.global_step = t + 1;
    r.shapes.clear();
    result.steps.push_back(r);
    if (st.global_step % spe == 0) {
      const int64_t epoch = st.global_step / spe;
      spdlog::info("epoch {}/{}: mean L_Total {:.6f}, lr {:.3e}", epoch, config_.epochs, epoch_total / static_cast<double>(spe), r.lr);
      epoch_total = 0.0;
      if (epoch % config_.checkpoint_every == 0 || epoch == config_.epochs) {
        char name[64];
        std::snprintf(name, sizeof name, "epoch_%04lld.ckpt", static_cast<long long>(epoch));
        save(dir / "checkpoints" / name);
      }
    }
  }
  for (auto& f : ahead) f.wait();
  save(dir / "checkpoints" / "last.ckpt");
  result.completed = st.global_step == T;
  if (!result.completed) {
    spdlog::info("stopped at step {} of {}", st.global_step, T);
    return result;
  }
  for (const auto& [name, store] : tests_) {
    objectives::MetricReport rep = evaluate(st.model(), *store);
    rep.write_csv(dir / "metrics" / (name + ".csv"));
    rep.write_json(dir / "metrics" / (name + ".json"), name);
    const auto m = rep.means();
    spdlog::info("{}: dice {:.4f} iou {:.4f} precision {:.4f} recall {:.4f} f2 {:.4f}", name, m.dice, m.iou,
                 m.precision, m.recall, m.f2);
    result.reports.emplace(name, std::move(rep));
  }
  return result;
}

std::string Runner::dry_run() {
  TripletBatch batch = batch_for_step(0);
  StepResult r = train_step(*state_, batch, 0, total_steps(), hook_, StepKind::probe);
  std::ostringstream o;
  const auto& n = config_.network;
  o << "backbone " << model::to_string(n.backbone) << ", input " << n.input_height << "x" << n.input_width
    << ", batch " << config_.batch_size << ", epochs " << config_.epochs << ", lr0 " << config_.lr0
    << " (cosine), steps/epoch " << steps_per_epoch() << ", total steps " << total_steps() << "\n";
  o << "modules:";
  for (const auto& m : state_->model().module_names()) o << " " << m;
  o << "\n";
  for (auto& [prefix, set] : state_->model().all_groups()) {
    o << "  " << prefix << " " << set->size() << " tensors, " << set->element_count() << " values\n";
  }
  for (const auto& [what, shape] : r.shapes) o << "  " << what << " " << netcore::shape_str(shape) << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "step 0: lr %.6g L_BCE %.6f L_Dice %.6f L_CL %.6f L_Total %.6f\n", r.lr, r.bce, r.dice,
                r.cl, r.total);
  o << buf;
  return o.str();
}

}  // namespace clpolyp::trainer
