// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "clpolyp/netcore/parameter_set.h"

namespace clpolyp::netcore {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
};

/// First/second moment estimates keyed by parameter name.
struct AdamState {
  std::map<std::string, AdamMoments> moments;
};

/// One bias-corrected Adam update of every trainable parameter at step `t` (t >= 1).
/// Throws NumericError naming the parameter if any gradient is non-finite;
/// in that case no parameter is modified.
void adam_step(ParameterSet& params, AdamState& state, double lr, int64_t t, const AdamOptions& options = {});

/// lr0 * (1 + cos(pi * t / T)) / 2, decaying to zero at t = T.
double cosine_lr(int64_t t, int64_t total_steps, double lr0);

}  // namespace clpolyp::netcore
