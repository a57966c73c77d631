// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/optim.h"

#include <cmath>
#include <numbers>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

void adam_step(ParameterSet& params, AdamState& state, double lr, int64_t t, const AdamOptions& options) {
  if (t < 1) throw ValidationError("adam_step: step must be >= 1, got " + std::to_string(t));
  for (const auto& [name, p] : params.params()) {
    if (p.trainable && !p.var.grad().all_finite()) {
      throw NumericError("adam_step: non-finite gradient in " + name);
    }
  }
  const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
  for (auto& [name, p] : params.params()) {
    if (!p.trainable) continue;
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = p.var.grad();
    auto [it, inserted] = state.moments.try_emplace(name);
    AdamMoments& mom = it->second;
    if (inserted || mom.first.shape() != value.shape()) {
      mom.first = Tensor(value.shape());
      mom.second = Tensor(value.shape());
    }
    for (int64_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      mom.first[i] = options.beta1 * mom.first[i] + (1.0 - options.beta1) * g;
      mom.second[i] = options.beta2 * mom.second[i] + (1.0 - options.beta2) * g * g;
      const double m_hat = mom.first[i] / bias1;
      const double v_hat = mom.second[i] / bias2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

double cosine_lr(int64_t t, int64_t total_steps, double lr0) {
  if (total_steps <= 0) throw ValidationError("cosine_lr: total steps must be positive");
  if (t < 0 || t > total_steps) {
    throw ValidationError("cosine_lr: step " + std::to_string(t) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total_steps)));
}

}  // namespace clpolyp::netcore
