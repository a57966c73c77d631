// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <random>

#include "clpolyp/netcore/ops.h"

namespace clpolyp::testing {

inline netcore::Tensor random_tensor(const netcore::Shape& shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  netcore::Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

/// sum(x * R) for a fixed random R, so every output element carries a distinct weight.
inline netcore::Var weighted_sum(const netcore::Var& x, uint64_t seed) {
  netcore::Var r(random_tensor(x.shape(), seed));
  return netcore::sum(netcore::mul(x, r));
}

}  // namespace clpolyp::testing
