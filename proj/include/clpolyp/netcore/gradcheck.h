// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "clpolyp/netcore/parameter_set.h"

namespace clpolyp::netcore {

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Entries probed per parameter tensor (all of them if the tensor is smaller).
  int64_t samples_per_tensor = 8;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  int64_t worst_index = -1;
  int64_t entries_checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences.
///
/// Every trainable parameter of `params` is probed at sampled entries; frozen
/// ones are skipped. The error per entry is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
/// `loss_fn` must be deterministic and return a one-element Var.
GradCheckResult gradient_check(ParameterSet& params, const std::function<Var()>& loss_fn,
                               const GradCheckOptions& options = {});

}  // namespace clpolyp::netcore
