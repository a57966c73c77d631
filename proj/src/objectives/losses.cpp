// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/objectives/losses.h"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "clpolyp/errors.h"
#include "clpolyp/netcore/ops.h"

namespace clpolyp::objectives {

using netcore::Shape;
using netcore::shape_str;

void LossConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (K < 0) throw ConfigError("K must be non-negative");
  if (!(dice_smooth >= 0.0)) throw ConfigError("dice_smooth must be non-negative");
}

namespace {

double squared_distance(const double* a, const double* b, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void warn_no_negatives() { spdlog::warn("triplet loss called with K = 0; contrastive term is 0"); }

}  // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    const std::vector<std::vector<double>>& negatives, double alpha) {
  if (anchor.size() != positive.size()) throw ShapeError("triplet_loss: anchor and positive lengths differ");
  if (negatives.empty()) {
    warn_no_negatives();
    return 0.0;
  }
  const auto n = static_cast<int64_t>(anchor.size());
  const double dp = squared_distance(anchor.data(), positive.data(), n);
  double loss = 0.0;
  for (const auto& neg : negatives) {
    if (neg.size() != anchor.size()) throw ShapeError("triplet_loss: negative length differs");
    loss += std::max(0.0, dp - squared_distance(anchor.data(), neg.data(), n) + alpha);
  }
  return loss;
}

Var triplet_loss(const Var& anchor, const Tensor& positive, const Tensor& negatives, int K, double alpha) {
  const Shape& as = anchor.shape();
  if (as.size() != 2 || positive.shape() != as) {
    throw ShapeError("triplet_loss: anchor " + shape_str(as) + " vs positive " + shape_str(positive.shape()));
  }
  const int64_t B = as[0], D = as[1];
  if (K == 0) {
    warn_no_negatives();
    return Var(Tensor({1}));
  }
  if (negatives.shape() != Shape{B * K, D}) {
    throw ShapeError("triplet_loss: negatives " + shape_str(negatives.shape()) + ", expected [" +
                     std::to_string(B * K) + "x" + std::to_string(D) + "]");
  }
  const double* h = anchor.value().data();
  const double* p = positive.data();
  const double* n = negatives.data();
  // Active hinge terms, needed for the gradient.
  std::vector<uint8_t> active(static_cast<size_t>(B * K), 0);
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    const double dp = squared_distance(h + b * D, p + b * D, D);
    for (int64_t j = 0; j < K; ++j) {
      const double margin = dp - squared_distance(h + b * D, n + (b * K + j) * D, D) + alpha;
      if (margin > 0.0) {
        total += margin;
        active[static_cast<size_t>(b * K + j)] = 1;
      }
    }
  }
  Tensor out({1});
  out[0] = total / static_cast<double>(B);
  Var result = Var::make(std::move(out), {&anchor}, nullptr, "triplet_loss");
  if (result.node()) {
    auto pos = std::make_shared<Tensor>(positive);
    auto neg = std::make_shared<Tensor>(negatives);
    result.node()->backward = [pos, neg, active = std::move(active), B, D, K](const Tensor& g,
                                                                              std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      // d/dh (‖h−p‖² − ‖h−n‖²) = 2(n − p)
      const double s = 2.0 * g[0] / static_cast<double>(B);
      double* gh = grads[0]->data();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t j = 0; j < K; ++j) {
          if (!active[static_cast<size_t>(b * K + j)]) continue;
          const double* nr = neg->data() + (b * K + j) * D;
          const double* pr = pos->data() + b * D;
          for (int64_t d = 0; d < D; ++d) gh[b * D + d] += s * (nr[d] - pr[d]);
        }
    };
  }
  return result;
}

Var dice_loss(const Var& probabilities, const Tensor& target, double smooth) {
  if (probabilities.shape() != target.shape()) {
    throw ValidationError("dice_loss: prediction " + shape_str(probabilities.shape()) + " vs target " +
                          shape_str(target.shape()));
  }
  const double* P = probabilities.value().data();
  const double* G = target.data();
  const int64_t n = target.numel();
  double spg = 0.0, sp = 0.0, sg = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (!(P[i] >= 0.0 && P[i] <= 1.0)) throw ValidationError("dice_loss: probabilities must lie in [0,1]");
    spg += P[i] * G[i];
    sp += P[i];
    sg += G[i];
  }
  const double num = 2.0 * spg + smooth;
  const double den = sp + sg + smooth;
  Tensor out({1});
  out[0] = den > 0.0 ? 1.0 - num / den : 0.0;
  Var result = Var::make(std::move(out), {&probabilities}, nullptr, "dice_loss");
  if (result.node() && den > 0.0) {
    auto tgt = std::make_shared<Tensor>(target);
    result.node()->backward = [tgt, num, den](const Tensor& g, std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      const double inv = g[0] / (den * den);
      double* gp = grads[0]->data();
      for (int64_t i = 0; i < tgt->numel(); ++i) gp[i] -= inv * (2.0 * (*tgt)[i] * den - num);
    };
  } else if (result.node()) {
    result.node()->backward = [](const Tensor&, std::span<Tensor* const>) {};
  }
  return result;
}

Var bce_loss(const Var& logits, const Tensor& target) {
  if (logits.shape() != target.shape()) {
    throw ValidationError("bce_loss: logits " + shape_str(logits.shape()) + " vs target " + shape_str(target.shape()));
  }
  if (!logits.value().all_finite()) throw NumericError("bce_loss: non-finite logits");
  const double* z = logits.value().data();
  const double* g = target.data();
  const int64_t n = target.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::max(z[i], 0.0) - z[i] * g[i] + std::log1p(std::exp(-std::abs(z[i])));
  Tensor out({1});
  out[0] = acc / static_cast<double>(n);
  Var result = Var::make(std::move(out), {&logits}, nullptr, "bce_loss");
  if (result.node()) {
    auto saved = logits.storage();
    auto tgt = std::make_shared<Tensor>(target);
    result.node()->backward = [saved, tgt](const Tensor& go, std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      const int64_t n = tgt->numel();
      const double s = go[0] / static_cast<double>(n);
      double* gz = grads[0]->data();
      for (int64_t i = 0; i < n; ++i) {
        const double v = (*saved)[i];
        const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        gz[i] += s * (sig - (*tgt)[i]);
      }
    };
  }
  return result;
}

SegLoss seg_loss(const Var& logits, const Tensor& target, double dice_smooth) {
  SegLoss out;
  out.bce = bce_loss(logits, target);
  out.dice = dice_loss(netcore::sigmoid(logits), target, dice_smooth);
  out.total = netcore::add(out.bce, out.dice);
  return out;
}

Var total_loss(const Var& seg, const Var& cl, double beta) { return netcore::add(seg, netcore::scale(cl, beta)); }

double total_loss(double seg, double cl, double beta) { return seg + beta * cl; }

}  // namespace clpolyp::objectives
