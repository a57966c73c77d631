// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "clpolyp/netcore/optim.h"
#include "clpolyp/netcore/parameter_set.h"
#include "clpolyp/netcore/tensor.h"

namespace clpolyp::netcore {

/// On-disk layout (all integers little-endian):
///
///   bytes 0..7   magic "CLPCKPT1"
///   u64          length of the metadata JSON, followed by the UTF-8 JSON text
///   u64          tensor count
///   per tensor:  u32 name length, name bytes,
///                u8 dtype (1 = float64), u32 rank, u64 dims[rank],
///                raw little-endian values
///
/// Tensors are written in name order.
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
};

/// Writes atomically: the file is first written to `<path>.tmp` and renamed,
/// so an IO failure leaves any previous checkpoint intact.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers under `prefix` (e.g. "decoder/").
void export_parameters(const ParameterSet& params, const std::string& prefix, Checkpoint& ckpt);
/// Loads every parameter and buffer of `params` from `prefix`; missing entries
/// or shape mismatches raise ValidationError unless `allow_missing`.
/// Returns the number of tensors loaded.
size_t import_parameters(ParameterSet& params, const std::string& prefix, const Checkpoint& ckpt,
                         bool allow_missing = false);

void export_adam_state(const AdamState& state, const std::string& prefix, Checkpoint& ckpt);
AdamState import_adam_state(const std::string& prefix, const Checkpoint& ckpt);

}  // namespace clpolyp::netcore
