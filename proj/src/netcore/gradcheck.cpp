// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

namespace {

double evaluate(const std::function<Var()>& loss_fn) {
  NoGradGuard guard;
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite loss " + std::to_string(v));
  return v;
}

}  // namespace

GradCheckResult gradient_check(ParameterSet& params, const std::function<Var()>& loss_fn,
                               const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ValidationError("gradient_check: epsilon must be positive");
  params.zero_grad();
  Var loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("gradient_check: non-finite loss " + std::to_string(loss.item()));
  if (loss.requires_grad()) loss.backward();

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (auto& [name, p] : params.params()) {
    if (!p.trainable) continue;
    const Tensor analytic = p.var.grad();
    Tensor& value = p.var.mutable_value();
    std::vector<int64_t> indices(static_cast<size_t>(value.numel()));
    std::iota(indices.begin(), indices.end(), 0);
    if (static_cast<int64_t>(indices.size()) > options.samples_per_tensor) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(static_cast<size_t>(options.samples_per_tensor));
    }
    for (int64_t idx : indices) {
      const double saved = value[idx];
      value[idx] = saved + options.epsilon;
      const double plus = evaluate(loss_fn);
      value[idx] = saved - options.epsilon;
      const double minus = evaluate(loss_fn);
      value[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic[idx];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.entries_checked;
      if (err > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_parameter = name;
        result.worst_index = idx;
      }
    }
  }
  return result;
}

}  // namespace clpolyp::netcore
