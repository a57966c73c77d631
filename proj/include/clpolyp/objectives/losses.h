// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <span>
#include <vector>

#include "clpolyp/netcore/autograd.h"
#include "clpolyp/netcore/tensor.h"

namespace clpolyp::objectives {

using netcore::Tensor;
using netcore::Var;

struct LossConfig {
  double alpha = 0.2;        // triplet margin
  double beta = 0.5;         // weight of the contrastive term
  int K = 4;                 // negatives per anchor
  double dice_smooth = 1.0;  // added to Dice numerator and denominator

  /// ConfigError on alpha <= 0, beta < 0, K < 0 or dice_smooth < 0.
  void validate() const;
};

/// Single-anchor triplet hinge: Σ_j max(0, ‖h−p‖² − ‖h−n_j‖² + alpha).
/// Returns 0 (with a warning) when `negatives` is empty.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    const std::vector<std::vector<double>>& negatives, double alpha);

/// Batched triplet hinge. `anchor` is B×D and takes gradients; `positive` is
/// B×D and `negatives` is (B·K)×D with anchor b owning rows [b·K, (b+1)·K).
/// Returns the batch mean of the per-anchor sums.
Var triplet_loss(const Var& anchor, const Tensor& positive, const Tensor& negatives, int K, double alpha);

/// 1 − (2ΣPG + smooth)/(ΣP + ΣG + smooth) over every element of the batch.
/// ValidationError when P leaves [0,1] or shapes differ.
Var dice_loss(const Var& probabilities, const Tensor& target, double smooth);

/// Mean binary cross-entropy on logits: max(z,0) − z·g + log(1 + e^{−|z|}).
/// NumericError on non-finite logits.
Var bce_loss(const Var& logits, const Tensor& target);

struct SegLoss {
  Var bce;
  Var dice;
  Var total;
};

/// L_BCE(logits) + L_Dice(sigmoid(logits)).
SegLoss seg_loss(const Var& logits, const Tensor& target, double dice_smooth);

/// seg + beta·cl.
Var total_loss(const Var& seg, const Var& cl, double beta);
double total_loss(double seg, double cl, double beta);

}  // namespace clpolyp::objectives
