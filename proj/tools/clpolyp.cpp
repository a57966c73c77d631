// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "clpolyp/augment/augment.h"
#include "clpolyp/data/manifest.h"
#include "clpolyp/data/synthetic.h"
#include "clpolyp/errors.h"
#include "clpolyp/netcore/gradcheck.h"
#include "clpolyp/objectives/losses.h"
#include "clpolyp/taxonomy/taxonomy.h"
#include "clpolyp/trainer/trainer.h"

namespace fs = std::filesystem;
using namespace clpolyp;

namespace {

data::Size2 parse_size(const std::string& s) {
  const auto x = s.find('x');
  const int64_t h = std::stoll(x == std::string::npos ? s : s.substr(0, x));
  const int64_t w = std::stoll(x == std::string::npos ? s : s.substr(x + 1));
  if (h <= 0 || w <= 0) throw ConfigError("size must be positive: " + s);
  return {h, w};
}

int cmd_train(const std::string& config, const std::vector<std::string>& overrides) {
  trainer::TrainConfig cfg = trainer::load_config(config, overrides);
  trainer::Runner runner(cfg);
  if (cfg.dry_run) {
    std::cout << runner.dry_run();
    return 0;
  }
  trainer::RunResult r = runner.run();
  std::cout << "steps run: " << r.steps.size() << ", checkpoint: " << r.last_checkpoint.string()
            << (r.completed ? "" : " (interrupted)") << "\n";
  for (const auto& [name, rep] : r.reports) {
    const auto m = rep.means();
    std::printf("%s: dice %.4f iou %.4f precision %.4f recall %.4f f2 %.4f\n", name.c_str(), m.dice, m.iou,
                m.precision, m.recall, m.f2);
  }
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out) {
  netcore::Checkpoint ck = netcore::read_checkpoint(checkpoint);
  if (!ck.metadata.contains("config")) throw ValidationError("checkpoint has no embedded config");
  trainer::TrainConfig cfg = trainer::parse_config(ck.metadata["config"].get<std::string>());
  model::ClPolypNet net(cfg.network, 0);
  net.load_from(ck);
  data::DatasetManifest m = data::read_manifest(manifest);
  const std::string name = manifest.stem().string();
  trainer::SampleStore store(m, {cfg.network.input_height, cfg.network.input_width}, 0);
  objectives::MetricReport rep = trainer::evaluate(net, store);
  rep.write_csv(out / (name + ".csv"));
  rep.write_json(out / (name + ".json"), name);
  const auto s = rep.means();
  std::printf("%s (%zu images): dice %.4f iou %.4f precision %.4f recall %.4f f2 %.4f\n", name.c_str(),
              rep.per_image().size(), s.dice, s.iou, s.precision, s.recall, s.f2);
  return 0;
}

int cmd_classify(const fs::path& root, const fs::path& out, double small_max, double medium_max, int64_t size) {
  const data::DatasetManifest m = data::scan_dataset(root);
  const taxonomy::SizeThresholds th{small_max, medium_max};
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw IoError("cannot write " + out.string());
  }
  std::ostream& o = out.empty() ? std::cout : file;
  o << "id,component_count,area_fraction,count_class,size_class\n";
  for (const auto& e : m.entries) {
    data::ImageSample s = data::load_sample(e.image, e.mask, {size, size});
    if (s.mask.foreground() == 0) {
      spdlog::warn("{}: no polyp present, skipped", s.id);
      continue;
    }
    const taxonomy::MaskTaxonomy t = taxonomy::classify_mask(s.mask, th);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", t.area_fraction);
    o << s.id << "," << t.component_count << "," << buf << "," << taxonomy::to_string(t.count_class) << ","
      << taxonomy::to_string(t.size_class) << "\n";
  }
  return 0;
}

data::Image denormalize(const data::Image& img) {
  data::Image out = img;
  for (float& v : out.pixels) v = v * 0.5f + 0.5f;
  return out;
}

int cmd_preview(const std::string& preset, int n, const fs::path& root, const fs::path& out, uint64_t seed,
                int64_t size) {
  std::vector<data::ImageSample> sources;
  if (root.empty()) {
    sources = data::make_synthetic_dataset(6, {size, size}, seed);
  } else {
    for (const auto& e : data::scan_dataset(root).entries) sources.push_back(data::load_sample(e.image, e.mask, {size, size}));
  }
  if (sources.empty()) throw ValidationError("no samples to preview");
  const augment::AugmentSpec spec = augment::preset(preset);
  fs::create_directories(out);
  for (int i = 0; i < n; ++i) {
    const data::ImageSample& s = sources[static_cast<size_t>(i) % sources.size()];
    augment::Augmented a = augment::apply(spec, s, seed + static_cast<uint64_t>(i));
    char stem[64];
    std::snprintf(stem, sizeof stem, "%04d_", i);
    data::save_image(out / (stem + s.id + "_image.png"), denormalize(a.image));
    data::save_mask(out / (stem + s.id + "_mask.png"), *a.mask);
  }
  std::cout << "wrote " << n << " image/mask pairs to " << out.string() << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& preset, int64_t size, int64_t samples, uint64_t seed) {
  model::NetworkSpec spec = model::parse_backbone(preset) == model::Backbone::tiny ? model::NetworkSpec::tiny()
                                                                                    : model::NetworkSpec::resnet50();
  spec.input_height = spec.input_width = size;
  spec.use_cl_branch = false;
  model::ClPolypNet net(spec, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  netcore::Tensor x({2, 3, size, size}), g({2, 1, size, size});
  for (double& v : x.values()) v = u(rng);
  for (double& v : g.values()) v = u(rng) > 0.2 ? 1.0 : 0.0;
  const netcore::ForwardContext ctx{true, false};
  auto loss = [&] { return objectives::seg_loss(net.segment(netcore::Var(x), ctx), g, 1.0).total; };
  double worst = 0.0;
  for (auto& [prefix, set] : net.trainable_groups()) {
    const auto r = netcore::gradient_check(*set, loss, {.samples_per_tensor = samples, .seed = seed});
    std::printf("%-16s %6lld entries  max relative error %.3e  (%s)\n", prefix.c_str(),
                static_cast<long long>(r.entries_checked), r.max_relative_error, r.worst_parameter.c_str());
    worst = std::max(worst, r.max_relative_error);
  }
  const bool ok = worst < 1e-3;
  std::printf("%s: max relative error %.3e (threshold 1e-3)\n", ok ? "PASS" : "FAIL", worst);
  return ok ? 0 : 1;
}

int cmd_synthetic(const fs::path& out, int n, const std::string& size, uint64_t seed) {
  for (const auto& s : data::make_synthetic_dataset(n, parse_size(size), seed)) data::write_sample(out, s);
  std::cout << "wrote " << n << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_split(const std::vector<std::string>& roots, const std::string& scenario, uint64_t seed, const fs::path& out) {
  std::vector<data::DatasetManifest> sources;
  for (const auto& r : roots) sources.push_back(data::scan_dataset(r));
  data::ScenarioSplit s = data::make_scenario_split(sources, data::parse_scenario(scenario), seed);
  fs::create_directories(out);
  data::write_manifest(out / "train.tsv", s.train);
  for (const auto& t : s.tests) data::write_manifest(out / ("test_" + t.name + ".tsv"), t);
  std::cout << "train " << s.train.entries.size();
  for (const auto& t : s.tests) std::cout << ", test " << t.name << " " << t.entries.size();
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clpolyp: polyp segmentation with a contrastive taxonomy branch"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "train from a key=value config file");
  train->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--override", overrides, "key=value, repeatable");

  std::string checkpoint, manifest, eval_out = "metrics";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report directory");

  std::string root, csv_out;
  double small_max = 0.05, medium_max = 0.15;
  int64_t classify_size = 384;
  auto* classify = app.add_subcommand("classify-masks", "count/size taxonomy of every mask as CSV");
  classify->add_option("--root", root, "dataset root with images/ and masks/")->required();
  classify->add_option("--out", csv_out, "CSV path (stdout if omitted)");
  classify->add_option("--small-max", small_max);
  classify->add_option("--medium-max", medium_max);
  classify->add_option("--size", classify_size, "working resolution");

  std::string preset = augment::kDefaultPreset, preview_root, preview_out = "augment_preview";
  int n = 8;
  uint64_t seed = 0;
  int64_t preview_size = 256;
  auto* preview = app.add_subcommand("augment-preview", "write augmented image/mask pairs");
  preview->add_option("--preset", preset);
  preview->add_option("--n", n);
  preview->add_option("--root", preview_root, "dataset root (synthetic samples if omitted)");
  preview->add_option("--out", preview_out);
  preview->add_option("--seed", seed);
  preview->add_option("--size", preview_size);

  std::string gc_preset = "tiny";
  int64_t gc_size = 64, gc_samples = 4;
  auto* gc = app.add_subcommand("gradcheck", "end-to-end gradient check");
  gc->add_option("--preset", gc_preset);
  gc->add_option("--size", gc_size);
  gc->add_option("--samples", gc_samples, "entries per parameter tensor");
  gc->add_option("--seed", seed);

  std::string syn_out, syn_size = "96x96";
  int syn_n = 12;
  auto* syn = app.add_subcommand("make-synthetic", "write a synthetic image/mask dataset");
  syn->add_option("--out", syn_out)->required();
  syn->add_option("--n", syn_n);
  syn->add_option("--size", syn_size, "HxW");
  syn->add_option("--seed", seed);

  std::vector<std::string> split_roots;
  std::string scenario = "I", split_out;
  auto* split = app.add_subcommand("split", "write scenario train/test manifests");
  split->add_option("--root", split_roots, "dataset root, repeatable")->required();
  split->add_option("--scenario", scenario);
  split->add_option("--seed", seed);
  split->add_option("--out", split_out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config, overrides);
    if (*eval) return cmd_eval(checkpoint, manifest, eval_out);
    if (*classify) return cmd_classify(root, csv_out, small_max, medium_max, classify_size);
    if (*preview) return cmd_preview(preset, n, preview_root, preview_out, seed, preview_size);
    if (*gc) return cmd_gradcheck(gc_preset, gc_size, gc_samples, seed);
    if (*syn) return cmd_synthetic(syn_out, syn_n, syn_size, seed);
    if (*split) return cmd_split(split_roots, scenario, seed, split_out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
