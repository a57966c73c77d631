// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'L', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr uint8_t kFloat64 = 1;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated checkpoint: " + path.string());
  return v;
}

std::string get_string(std::ifstream& in, size_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw IoError("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    const std::string meta = ckpt.metadata.dump();
    put<uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<uint64_t>(out, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
      put<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint8_t>(out, kFloat64);
      put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
      for (int64_t d : t.shape()) put<uint64_t>(out, static_cast<uint64_t>(d));
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  Checkpoint ckpt;
  const auto meta_len = get<uint64_t>(in, path);
  try {
    ckpt.metadata = nlohmann::json::parse(get_string(in, meta_len, path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint metadata in " + path.string() + ": " + e.what());
  }
  const auto count = get<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<uint32_t>(in, path);
    std::string name = get_string(in, name_len, path);
    if (get<uint8_t>(in, path) != kFloat64) throw IoError("unsupported dtype for " + name + " in " + path.string());
    const auto rank = get<uint32_t>(in, path);
    Shape shape;
    for (uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int64_t>(get<uint64_t>(in, path)));
    Tensor t(shape);
    if (t.numel() &&
        !in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)))) {
      throw IoError("truncated tensor " + name + " in " + path.string());
    }
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void export_parameters(const ParameterSet& params, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& [name, p] : params.params()) ckpt.tensors[prefix + name] = p.var.value();
  for (const auto& [name, b] : params.buffers()) ckpt.tensors[prefix + name] = *b;
}

size_t import_parameters(ParameterSet& params, const std::string& prefix, const Checkpoint& ckpt,
                         bool allow_missing) {
  size_t loaded = 0;
  auto load = [&](const std::string& name, Tensor& dst) {
    auto it = ckpt.tensors.find(prefix + name);
    if (it == ckpt.tensors.end()) {
      if (allow_missing) return;
      throw ValidationError("checkpoint has no tensor " + prefix + name);
    }
    if (it->second.shape() != dst.shape()) {
      throw ValidationError("checkpoint tensor " + prefix + name + " has shape " + shape_str(it->second.shape()) +
                            ", expected " + shape_str(dst.shape()));
    }
    dst.assign(it->second);
    ++loaded;
  };
  for (auto& [name, p] : params.params()) load(name, p.var.mutable_value());
  for (const auto& [name, b] : params.buffers()) load(name, *b);
  return loaded;
}

void export_adam_state(const AdamState& state, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& [name, m] : state.moments) {
    ckpt.tensors[prefix + name + "/adam_m"] = m.first;
    ckpt.tensors[prefix + name + "/adam_v"] = m.second;
  }
}

AdamState import_adam_state(const std::string& prefix, const Checkpoint& ckpt) {
  AdamState state;
  const std::string suffix = "/adam_m";
  for (auto it = ckpt.tensors.lower_bound(prefix); it != ckpt.tensors.end(); ++it) {
    const std::string& key = it->first;
    if (key.compare(0, prefix.size(), prefix) != 0) break;
    if (key.size() <= suffix.size() || key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const std::string name = key.substr(prefix.size(), key.size() - prefix.size() - suffix.size());
    auto v = ckpt.tensors.find(prefix + name + "/adam_v");
    if (v == ckpt.tensors.end()) throw ValidationError("checkpoint has adam_m but no adam_v for " + name);
    state.moments[name] = AdamMoments{it->second, v->second};
  }
  return state;
}

}  // namespace clpolyp::netcore
