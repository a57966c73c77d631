// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/trainer/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "clpolyp/augment/augment.h"
#include "clpolyp/errors.h"
#include "clpolyp/netcore/parameter_set.h"

namespace clpolyp::trainer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string join(const std::vector<std::filesystem::path>& ps) {
  std::string out;
  for (size_t i = 0; i < ps.size(); ++i) out += (i ? "," : "") + ps[i].string();
  return out;
}

std::vector<std::filesystem::path> paths(const std::string& v) {
  std::vector<std::filesystem::path> out;
  for (const auto& s : split_list(v)) out.emplace_back(s);
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Parser {
  TrainConfig cfg;
  bool maspp_set = false, proj_set = false;

  void set(const std::string& key, const std::string& v) {
    static const std::map<std::string, std::function<void(Parser&, const std::string&, const std::string&)>> table{
        {"name", [](Parser& p, auto&, auto& v) { p.cfg.name = v; }},
        {"output_root", [](Parser& p, auto&, auto& v) { p.cfg.output_root = v; }},
        {"scenario", [](Parser& p, auto&, auto& v) { p.cfg.scenario = data::parse_scenario(v); }},
        {"seed", [](Parser& p, auto& k, auto& v) { p.cfg.seed = parse_number<uint64_t>(k, v); }},
        {"data_roots", [](Parser& p, auto&, auto& v) { p.cfg.data_roots = paths(v); }},
        {"extra_test_roots", [](Parser& p, auto&, auto& v) { p.cfg.extra_test_roots = paths(v); }},
        {"train_manifest", [](Parser& p, auto&, auto& v) { p.cfg.train_manifest = v; }},
        {"test_manifests", [](Parser& p, auto&, auto& v) { p.cfg.test_manifests = paths(v); }},
        {"backbone",
         [](Parser& p, auto&, auto& v) {
           const model::NetworkSpec preset = model::parse_backbone(v) == model::Backbone::tiny
                                                 ? model::NetworkSpec::tiny()
                                                 : model::NetworkSpec::resnet50();
           p.cfg.network.backbone = preset.backbone;
           if (!p.maspp_set) p.cfg.network.maspp_channels = preset.maspp_channels;
           if (!p.proj_set) p.cfg.network.projection_dim = preset.projection_dim;
         }},
        {"input_size",
         [](Parser& p, auto& k, auto& v) {
           const auto x = v.find('x');
           p.cfg.network.input_height = parse_number<int64_t>(k, x == std::string::npos ? v : v.substr(0, x));
           p.cfg.network.input_width = parse_number<int64_t>(k, x == std::string::npos ? v : v.substr(x + 1));
         }},
        {"maspp_channels",
         [](Parser& p, auto& k, auto& v) {
           p.cfg.network.maspp_channels = parse_number<int64_t>(k, v);
           p.maspp_set = true;
         }},
        {"projection_dim",
         [](Parser& p, auto& k, auto& v) {
           p.cfg.network.projection_dim = parse_number<int64_t>(k, v);
           p.proj_set = true;
         }},
        {"use_maspp", [](Parser& p, auto& k, auto& v) { p.cfg.network.use_maspp = parse_bool(k, v); }},
        {"use_ca", [](Parser& p, auto& k, auto& v) { p.cfg.network.use_ca = parse_bool(k, v); }},
        {"use_cl_branch", [](Parser& p, auto& k, auto& v) { p.cfg.network.use_cl_branch = parse_bool(k, v); }},
        {"momentum", [](Parser& p, auto& k, auto& v) { p.cfg.network.momentum = parse_number<double>(k, v); }},
        {"se_reduction", [](Parser& p, auto& k, auto& v) { p.cfg.network.se_reduction = parse_number<int64_t>(k, v); }},
        {"backbone_weights", [](Parser& p, auto&, auto& v) { p.cfg.network.backbone_weights = v; }},
        {"alpha", [](Parser& p, auto& k, auto& v) { p.cfg.loss.alpha = parse_number<double>(k, v); }},
        {"beta", [](Parser& p, auto& k, auto& v) { p.cfg.loss.beta = parse_number<double>(k, v); }},
        {"K", [](Parser& p, auto& k, auto& v) { p.cfg.loss.K = parse_number<int>(k, v); }},
        {"dice_smooth", [](Parser& p, auto& k, auto& v) { p.cfg.loss.dice_smooth = parse_number<double>(k, v); }},
        {"size_small_max", [](Parser& p, auto& k, auto& v) { p.cfg.thresholds.small_max = parse_number<double>(k, v); }},
        {"size_medium_max",
         [](Parser& p, auto& k, auto& v) { p.cfg.thresholds.medium_max = parse_number<double>(k, v); }},
        {"augment_preset", [](Parser& p, auto&, auto& v) { p.cfg.augment_preset = v; }},
        {"batch_size", [](Parser& p, auto& k, auto& v) { p.cfg.batch_size = parse_number<int64_t>(k, v); }},
        {"epochs", [](Parser& p, auto& k, auto& v) { p.cfg.epochs = parse_number<int64_t>(k, v); }},
        {"lr0", [](Parser& p, auto& k, auto& v) { p.cfg.lr0 = parse_number<double>(k, v); }},
        {"checkpoint_every", [](Parser& p, auto& k, auto& v) { p.cfg.checkpoint_every = parse_number<int64_t>(k, v); }},
        {"max_steps", [](Parser& p, auto& k, auto& v) { p.cfg.max_steps = parse_number<int64_t>(k, v); }},
        {"resume", [](Parser& p, auto&, auto& v) { p.cfg.resume = v; }},
        {"dry_run", [](Parser& p, auto& k, auto& v) { p.cfg.dry_run = parse_bool(k, v); }},
    };
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(*this, key, v);
  }

  void line(const std::string& raw, const std::string& origin) {
    std::string s = raw.substr(0, raw.find('#'));
    s = trim(s);
    if (s.empty()) return;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected key = value, got '" + s + "'");
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  network.validate();
  loss.validate();
  thresholds.validate();
  augment::preset(augment_preset);
  if (network.input_height != network.input_width) {
    throw ConfigError("input_size must be square so right-angle rotations keep batch shapes fixed");
  }
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch-norm statistics)");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(lr0 >= 0.0)) throw ConfigError("lr0 must be non-negative");
  if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (network.use_cl_branch && loss.K == 0) throw ConfigError("K must be positive when the contrastive branch is on");
  if (data_roots.empty() && train_manifest.empty()) throw ConfigError("set data_roots or train_manifest");
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "name = " << name << "\n"
    << "output_root = " << output_root.string() << "\n"
    << "scenario = " << data::to_string(scenario) << "\n"
    << "seed = " << seed << "\n"
    << "data_roots = " << join(data_roots) << "\n"
    << "extra_test_roots = " << join(extra_test_roots) << "\n"
    << "train_manifest = " << train_manifest.string() << "\n"
    << "test_manifests = " << join(test_manifests) << "\n"
    << "backbone = " << model::to_string(network.backbone) << "\n"
    << "input_size = " << network.input_height << "x" << network.input_width << "\n"
    << "maspp_channels = " << network.maspp_channels << "\n"
    << "projection_dim = " << network.projection_dim << "\n"
    << "use_maspp = " << b(network.use_maspp) << "\n"
    << "use_ca = " << b(network.use_ca) << "\n"
    << "use_cl_branch = " << b(network.use_cl_branch) << "\n"
    << "momentum = " << fmt_double(network.momentum) << "\n"
    << "se_reduction = " << network.se_reduction << "\n"
    << "backbone_weights = " << network.backbone_weights << "\n"
    << "alpha = " << fmt_double(loss.alpha) << "\n"
    << "beta = " << fmt_double(loss.beta) << "\n"
    << "K = " << loss.K << "\n"
    << "dice_smooth = " << fmt_double(loss.dice_smooth) << "\n"
    << "size_small_max = " << fmt_double(thresholds.small_max) << "\n"
    << "size_medium_max = " << fmt_double(thresholds.medium_max) << "\n"
    << "augment_preset = " << augment_preset << "\n"
    << "batch_size = " << batch_size << "\n"
    << "epochs = " << epochs << "\n"
    << "lr0 = " << fmt_double(lr0) << "\n"
    << "checkpoint_every = " << checkpoint_every << "\n"
    << "max_steps = " << max_steps << "\n"
    << "resume = " << resume << "\n"
    << "dry_run = " << b(dry_run) << "\n";
  return o.str();
}

uint64_t TrainConfig::trajectory_hash() const {
  TrainConfig c = *this;
  c.max_steps = 0;
  c.resume.clear();
  c.dry_run = false;
  c.checkpoint_every = 1;
  c.output_root.clear();
  c.name.clear();
  c.extra_test_roots.clear();
  c.test_manifests.clear();
  return netcore::fnv1a(c.to_text());
}

TrainConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  Parser p;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) p.line(line, "line " + std::to_string(++n));
  for (const auto& o : overrides) {
    if (o.find('=') == std::string::npos) throw ConfigError("override must be key=value, got '" + o + "'");
    p.line(o, "override");
  }
  return p.cfg;
}

TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace clpolyp::trainer
