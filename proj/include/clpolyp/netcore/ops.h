// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <span>
#include <vector>

#include "clpolyp/netcore/autograd.h"

namespace clpolyp::netcore {

struct Conv2dOptions {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
};

/// Output extent of a convolution / pooling window along one axis.
int64_t conv_output_size(int64_t in, int64_t kernel, int64_t stride, int64_t padding, int64_t dilation);

/// x: N×C×H×W, weight: O×C×k×k, bias: O or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dOptions& opt);

struct BatchNormOptions {
  bool training = true;
  bool update_running_stats = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Normalizes per channel over (N, H, W) for N×C×H×W or over N for N×C.
/// In training mode the batch statistics are used and, if requested, folded
/// into the running buffers (unbiased variance); otherwise the running
/// buffers are used.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opt);

Var relu(const Var& x);
Var sigmoid(const Var& x);

/// x: N×in, weight: out×in, bias: out or undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// N×C×H×W -> N×C×1×1
Var global_avg_pool(const Var& x);
Var max_pool2d(const Var& x, int64_t kernel, int64_t stride, int64_t padding);

Var reshape(const Var& x, Shape shape);
/// N×... -> N×rest
Var flatten(const Var& x);

/// Bilinear resize of N×C×H×W, half-pixel centres (align_corners = false).
Var upsample_bilinear(const Var& x, int64_t out_h, int64_t out_w);

Var concat_channels(std::span<const Var> xs);
Var add(const Var& a, const Var& b);
/// Elementwise product; `b` may be N×C×1×1 against an N×C×H×W `a`.
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Sum of all elements -> shape {1}.
Var sum(const Var& x);

/// Row-wise L2 normalization of N×D. A zero row raises NumericError.
Var l2_normalize(const Var& x);

}  // namespace clpolyp::netcore
