// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#include "clpolyp/netcore/ops.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "clpolyp/errors.h"

namespace clpolyp::netcore {

namespace {

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                     shape_str(x.shape()));
  }
}

struct ConvGeometry {
  int64_t channels, height, width, kernel_h, kernel_w, out_h, out_w;
  Conv2dOptions opt;

  int64_t col_rows() const { return channels * kernel_h * kernel_w; }
  int64_t col_cols() const { return out_h * out_w; }
  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && opt.stride == 1 && opt.padding == 0;
  }
};

void im2col(const double* img, const ConvGeometry& g, double* col) {
  const int64_t cols = g.col_cols();
  for (int64_t c = 0; c < g.channels; ++c) {
    const double* plane = img + c * g.height * g.width;
    for (int64_t ki = 0; ki < g.kernel_h; ++ki) {
      for (int64_t kj = 0; kj < g.kernel_w; ++kj) {
        double* row = col + ((c * g.kernel_h + ki) * g.kernel_w + kj) * cols;
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.opt.stride - g.opt.padding + ki * g.opt.dilation;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + ih * g.width;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation;
            dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* img) {
  const int64_t cols = g.col_cols();
  for (int64_t c = 0; c < g.channels; ++c) {
    double* plane = img + c * g.height * g.width;
    for (int64_t ki = 0; ki < g.kernel_h; ++ki) {
      for (int64_t kj = 0; kj < g.kernel_w; ++kj) {
        const double* row = col + ((c * g.kernel_h + ki) * g.kernel_w + kj) * cols;
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.opt.stride - g.opt.padding + ki * g.opt.dilation;
          if (ih < 0 || ih >= g.height) continue;
          double* dst = plane + ih * g.width;
          const double* src = row + oh * g.out_w;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.opt.stride - g.opt.padding + kj * g.opt.dilation;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

// C(m×n) = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  const int64_t lda = trans_a ? m : k;
  const int64_t ldb = trans_b ? k : n;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda),
              b, static_cast<int>(ldb), beta, c, static_cast<int>(n));
}

struct AxisInterp {
  std::vector<int64_t> lo, hi;
  std::vector<double> frac;
};

AxisInterp make_axis(int64_t in, int64_t out) {
  AxisInterp a;
  a.lo.resize(static_cast<size_t>(out));
  a.hi.resize(static_cast<size_t>(out));
  a.frac.resize(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int64_t lo = static_cast<int64_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const size_t k = static_cast<size_t>(i);
    a.lo[k] = lo;
    a.hi[k] = std::min(lo + 1, in - 1);
    a.frac[k] = src - static_cast<double>(lo);
  }
  return a;
}

}  // namespace

int64_t conv_output_size(int64_t in, int64_t kernel, int64_t stride, int64_t padding, int64_t dilation) {
  return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, const Conv2dOptions& opt) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: input " + shape_str(xs) + " has " + std::to_string(xs[1]) +
                     " channels, weight " + shape_str(ws) + " expects " + std::to_string(ws[1]));
  }
  if (bias.defined() && (bias.value().rank() != 1 || bias.shape()[0] != ws[0])) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(ws));
  }
  if (opt.stride < 1 || opt.dilation < 1 || opt.padding < 0) {
    throw ShapeError("conv2d: stride and dilation must be >= 1, padding >= 0");
  }
  ConvGeometry g{xs[1], xs[2], xs[3], ws[2], ws[3], 0, 0, opt};
  g.out_h = (xs[2] + 2 * opt.padding - opt.dilation * (ws[2] - 1) - 1) / opt.stride + 1;
  g.out_w = (xs[3] + 2 * opt.padding - opt.dilation * (ws[3] - 1) - 1) / opt.stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw ShapeError("conv2d: input " + shape_str(xs) + " too small for kernel " + shape_str(ws));
  }
  const int64_t batch = xs[0];
  const int64_t out_ch = ws[0];
  Tensor out({batch, out_ch, g.out_h, g.out_w});
  std::vector<double> col(g.is_pointwise() ? 0 : static_cast<size_t>(g.col_rows() * g.col_cols()));
  const int64_t in_plane = g.channels * g.height * g.width;
  const int64_t out_plane = out_ch * g.col_cols();
  for (int64_t n = 0; n < batch; ++n) {
    const double* src = x.value().data() + n * in_plane;
    if (!g.is_pointwise()) {
      im2col(src, g, col.data());
      src = col.data();
    }
    double* dst = out.data() + n * out_plane;
    gemm(false, false, out_ch, g.col_cols(), g.col_rows(), 1.0, weight.value().data(), src, 0.0, dst);
    if (bias.defined()) {
      for (int64_t o = 0; o < out_ch; ++o) {
        const double b = bias.value()[o];
        double* p = dst + o * g.col_cols();
        for (int64_t i = 0; i < g.col_cols(); ++i) p[i] += b;
      }
    }
  }
  auto xv = x.storage();
  auto wv = weight.storage();
  return Var::make(
      std::move(out), {&x, &weight, &bias},
      [xv, wv, g, batch, out_ch, in_plane, out_plane](const Tensor& grad, std::span<Tensor* const> grads) {
        std::vector<double> col(g.is_pointwise() ? 0 : static_cast<size_t>(g.col_rows() * g.col_cols()));
        std::vector<double> dcol(grads[0] && !g.is_pointwise() ? col.size() : 0);
        for (int64_t n = 0; n < batch; ++n) {
          const double* gout = grad.data() + n * out_plane;
          if (grads[1]) {
            const double* src = xv->data() + n * in_plane;
            if (!g.is_pointwise()) {
              im2col(src, g, col.data());
              src = col.data();
            }
            gemm(false, true, out_ch, g.col_rows(), g.col_cols(), 1.0, gout, src, 1.0, grads[1]->data());
          }
          if (grads[0]) {
            double* dx = grads[0]->data() + n * in_plane;
            if (g.is_pointwise()) {
              gemm(true, false, g.col_rows(), g.col_cols(), out_ch, 1.0, wv->data(), gout, 1.0, dx);
            } else {
              gemm(true, false, g.col_rows(), g.col_cols(), out_ch, 1.0, wv->data(), gout, 0.0, dcol.data());
              col2im_add(dcol.data(), g, dx);
            }
          }
          if (grads[2]) {
            for (int64_t o = 0; o < out_ch; ++o) {
              double s = 0.0;
              const double* p = gout + o * g.col_cols();
              for (int64_t i = 0; i < g.col_cols(); ++i) s += p[i];
              (*grads[2])[o] += s;
            }
          }
        }
      },
      "conv2d");
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opt) {
  const int rank = x.value().rank();
  if (rank != 2 && rank != 4) throw ShapeError("batch_norm: expected N×C or N×C×H×W, got " + shape_str(x.shape()));
  const Shape& xs = x.shape();
  const int64_t batch = xs[0];
  const int64_t channels = xs[1];
  const int64_t spatial = rank == 4 ? xs[2] * xs[3] : 1;
  if (gamma.value().numel() != channels || beta.value().numel() != channels ||
      running_mean.numel() != channels || running_var.numel() != channels) {
    throw ShapeError("batch_norm: parameters do not match " + std::to_string(channels) + " channels of " +
                     shape_str(xs));
  }
  const int64_t count = batch * spatial;
  std::vector<double> mean(static_cast<size_t>(channels)), invstd(static_cast<size_t>(channels));
  const double* xd = x.value().data();
  auto channel_values = [&](int64_t c, auto&& fn) {
    for (int64_t n = 0; n < batch; ++n) {
      const double* p = xd + (n * channels + c) * spatial;
      for (int64_t i = 0; i < spatial; ++i) fn(p[i]);
    }
  };
  for (int64_t c = 0; c < channels; ++c) {
    const size_t k = static_cast<size_t>(c);
    if (opt.training) {
      double s = 0.0;
      channel_values(c, [&](double v) { s += v; });
      const double m = s / static_cast<double>(count);
      double sq = 0.0;
      channel_values(c, [&](double v) { sq += (v - m) * (v - m); });
      const double var = sq / static_cast<double>(count);
      mean[k] = m;
      invstd[k] = 1.0 / std::sqrt(var + opt.eps);
      if (opt.update_running_stats) {
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean[c] = (1.0 - opt.momentum) * running_mean[c] + opt.momentum * m;
        running_var[c] = (1.0 - opt.momentum) * running_var[c] + opt.momentum * unbiased;
      }
    } else {
      mean[k] = running_mean[c];
      invstd[k] = 1.0 / std::sqrt(running_var[c] + opt.eps);
    }
  }
  Tensor out(xs);
  for (int64_t n = 0; n < batch; ++n) {
    for (int64_t c = 0; c < channels; ++c) {
      const size_t k = static_cast<size_t>(c);
      const double a = gamma.value()[c] * invstd[k];
      const double b = beta.value()[c] - mean[k] * a;
      const double* p = xd + (n * channels + c) * spatial;
      double* q = out.data() + (n * channels + c) * spatial;
      for (int64_t i = 0; i < spatial; ++i) q[i] = p[i] * a + b;
    }
  }
  auto xv = x.storage();
  auto gv = gamma.storage();
  const bool training = opt.training;
  return Var::make(
      std::move(out), {&x, &gamma, &beta},
      [xv, gv, mean = std::move(mean), invstd = std::move(invstd), batch, channels, spatial, count, training](
          const Tensor& grad, std::span<Tensor* const> grads) {
        for (int64_t c = 0; c < channels; ++c) {
          const size_t k = static_cast<size_t>(c);
          double dbeta = 0.0, dgamma = 0.0;
          for (int64_t n = 0; n < batch; ++n) {
            const double* p = xv->data() + (n * channels + c) * spatial;
            const double* gp = grad.data() + (n * channels + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
              dbeta += gp[i];
              dgamma += gp[i] * (p[i] - mean[k]) * invstd[k];
            }
          }
          if (grads[1]) (*grads[1])[c] += dgamma;
          if (grads[2]) (*grads[2])[c] += dbeta;
          if (!grads[0]) continue;
          const double gscale = (*gv)[c] * invstd[k];
          const double inv_count = 1.0 / static_cast<double>(count);
          for (int64_t n = 0; n < batch; ++n) {
            const double* p = xv->data() + (n * channels + c) * spatial;
            const double* gp = grad.data() + (n * channels + c) * spatial;
            double* dx = grads[0]->data() + (n * channels + c) * spatial;
            if (training) {
              for (int64_t i = 0; i < spatial; ++i) {
                const double xhat = (p[i] - mean[k]) * invstd[k];
                dx[i] += gscale * (gp[i] - dbeta * inv_count - xhat * dgamma * inv_count);
              }
            } else {
              for (int64_t i = 0; i < spatial; ++i) dx[i] += gscale * gp[i];
            }
          }
        }
      },
      "batch_norm");
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  const double* p = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = p[i] > 0.0 ? p[i] : 0.0;
  Var result = Var::make(std::move(out), {&x}, nullptr, "relu");
  if (result.node()) {
    // Only the output is saved; the input buffer can be released.
    auto saved = result.storage();
    result.node()->backward = [saved](const Tensor& grad, std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      for (int64_t i = 0; i < grad.numel(); ++i) {
        if ((*saved)[i] > 0.0) (*grads[0])[i] += grad[i];
      }
    };
  }
  return result;
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  const double* p = x.value().data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = p[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  Var result = Var::make(std::move(out), {&x}, nullptr, "sigmoid");
  if (result.node()) {
    auto saved = result.storage();
    result.node()->backward = [saved](const Tensor& grad, std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      for (int64_t i = 0; i < grad.numel(); ++i) {
        const double s = (*saved)[i];
        (*grads[0])[i] += grad[i] * s * (1.0 - s);
      }
    };
  }
  return result;
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const int64_t batch = x.shape()[0];
  const int64_t in = x.shape()[1];
  const int64_t outf = weight.shape()[0];
  if (weight.shape()[1] != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.value().numel() != outf) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  Tensor out({batch, outf});
  gemm(false, true, batch, outf, in, 1.0, x.value().data(), weight.value().data(), 0.0, out.data());
  if (bias.defined()) {
    for (int64_t n = 0; n < batch; ++n) {
      for (int64_t o = 0; o < outf; ++o) out[n * outf + o] += bias.value()[o];
    }
  }
  auto xv = x.storage();
  auto wv = weight.storage();
  return Var::make(
      std::move(out), {&x, &weight, &bias},
      [xv, wv, batch, in, outf](const Tensor& grad, std::span<Tensor* const> grads) {
        if (grads[0]) gemm(false, false, batch, in, outf, 1.0, grad.data(), wv->data(), 1.0, grads[0]->data());
        if (grads[1]) gemm(true, false, outf, in, batch, 1.0, grad.data(), xv->data(), 1.0, grads[1]->data());
        if (grads[2]) {
          for (int64_t n = 0; n < batch; ++n) {
            for (int64_t o = 0; o < outf; ++o) (*grads[2])[o] += grad[n * outf + o];
          }
        }
      },
      "linear");
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const Shape& xs = x.shape();
  const int64_t planes = xs[0] * xs[1];
  const int64_t spatial = xs[2] * xs[3];
  Tensor out({xs[0], xs[1], 1, 1});
  for (int64_t p = 0; p < planes; ++p) {
    double s = 0.0;
    const double* src = x.value().data() + p * spatial;
    for (int64_t i = 0; i < spatial; ++i) s += src[i];
    out[p] = s / static_cast<double>(spatial);
  }
  return Var::make(
      std::move(out), {&x},
      [planes, spatial](const Tensor& grad, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t p = 0; p < planes; ++p) {
          const double g = grad[p] / static_cast<double>(spatial);
          double* dst = grads[0]->data() + p * spatial;
          for (int64_t i = 0; i < spatial; ++i) dst[i] += g;
        }
      },
      "global_avg_pool");
}

Var max_pool2d(const Var& x, int64_t kernel, int64_t stride, int64_t padding) {
  require_rank(x, 4, "max_pool2d");
  const Shape& xs = x.shape();
  const int64_t oh = conv_output_size(xs[2], kernel, stride, padding, 1);
  const int64_t ow = conv_output_size(xs[3], kernel, stride, padding, 1);
  if (oh <= 0 || ow <= 0) throw ShapeError("max_pool2d: input " + shape_str(xs) + " too small");
  const int64_t planes = xs[0] * xs[1];
  const int64_t in_plane = xs[2] * xs[3];
  Tensor out({xs[0], xs[1], oh, ow});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = x.value().data() + p * in_plane;
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t best_idx = -1;
        for (int64_t ki = 0; ki < kernel; ++ki) {
          const int64_t h = i * stride - padding + ki;
          if (h < 0 || h >= xs[2]) continue;
          for (int64_t kj = 0; kj < kernel; ++kj) {
            const int64_t w = j * stride - padding + kj;
            if (w < 0 || w >= xs[3]) continue;
            const double v = src[h * xs[3] + w];
            if (v > best || best_idx < 0) {
              best = v;
              best_idx = h * xs[3] + w;
            }
          }
        }
        const int64_t o = (p * oh + i) * ow + j;
        out[o] = best;
        argmax[static_cast<size_t>(o)] = best_idx;
      }
    }
  }
  const int64_t out_plane = oh * ow;
  return Var::make(
      std::move(out), {&x},
      [argmax = std::move(argmax), planes, in_plane, out_plane](const Tensor& grad, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t p = 0; p < planes; ++p) {
          for (int64_t i = 0; i < out_plane; ++i) {
            const int64_t o = p * out_plane + i;
            (*grads[0])[p * in_plane + argmax[static_cast<size_t>(o)]] += grad[o];
          }
        }
      },
      "max_pool2d");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return Var::make(
      std::move(out), {&x},
      [](const Tensor& grad, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t i = 0; i < grad.numel(); ++i) (*grads[0])[i] += grad[i];
      },
      "reshape");
}

Var flatten(const Var& x) {
  const int64_t batch = x.shape().at(0);
  return reshape(x, {batch, x.value().numel() / std::max<int64_t>(batch, 1)});
}

Var upsample_bilinear(const Var& x, int64_t out_h, int64_t out_w) {
  require_rank(x, 4, "upsample_bilinear");
  const Shape& xs = x.shape();
  if (out_h <= 0 || out_w <= 0) throw ShapeError("upsample_bilinear: non-positive output size");
  const int64_t in_h = xs[2], in_w = xs[3];
  AxisInterp ay = make_axis(in_h, out_h);
  AxisInterp ax = make_axis(in_w, out_w);
  const int64_t planes = xs[0] * xs[1];
  Tensor out({xs[0], xs[1], out_h, out_w});
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = x.value().data() + p * in_h * in_w;
    double* dst = out.data() + p * out_h * out_w;
    for (int64_t i = 0; i < out_h; ++i) {
      const size_t yi = static_cast<size_t>(i);
      const double fy = ay.frac[yi];
      const double* r0 = src + ay.lo[yi] * in_w;
      const double* r1 = src + ay.hi[yi] * in_w;
      for (int64_t j = 0; j < out_w; ++j) {
        const size_t xj = static_cast<size_t>(j);
        const double fx = ax.frac[xj];
        const double top = r0[ax.lo[xj]] * (1.0 - fx) + r0[ax.hi[xj]] * fx;
        const double bot = r1[ax.lo[xj]] * (1.0 - fx) + r1[ax.hi[xj]] * fx;
        dst[i * out_w + j] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return Var::make(
      std::move(out), {&x},
      [ay = std::move(ay), ax = std::move(ax), planes, in_h, in_w, out_h, out_w](const Tensor& grad,
                                                                               std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t p = 0; p < planes; ++p) {
          double* dst = grads[0]->data() + p * in_h * in_w;
          const double* g = grad.data() + p * out_h * out_w;
          for (int64_t i = 0; i < out_h; ++i) {
            const size_t yi = static_cast<size_t>(i);
            const double fy = ay.frac[yi];
            double* r0 = dst + ay.lo[yi] * in_w;
            double* r1 = dst + ay.hi[yi] * in_w;
            for (int64_t j = 0; j < out_w; ++j) {
              const size_t xj = static_cast<size_t>(j);
              const double fx = ax.frac[xj];
              const double v = g[i * out_w + j];
              r0[ax.lo[xj]] += v * (1.0 - fy) * (1.0 - fx);
              r0[ax.hi[xj]] += v * (1.0 - fy) * fx;
              r1[ax.lo[xj]] += v * fy * (1.0 - fx);
              r1[ax.hi[xj]] += v * fy * fx;
            }
          }
        }
      },
      "upsample_bilinear");
}

Var concat_channels(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  for (const Var& v : xs) require_rank(v, 4, "concat_channels");
  const Shape& first = xs[0].shape();
  int64_t channels = 0;
  std::vector<int64_t> offsets;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat_channels: " + shape_str(first) + " vs " + shape_str(s));
    }
    offsets.push_back(channels);
    channels += s[1];
  }
  const int64_t batch = first[0];
  const int64_t spatial = first[2] * first[3];
  Tensor out({batch, channels, first[2], first[3]});
  std::vector<int64_t> widths;
  for (size_t k = 0; k < xs.size(); ++k) {
    const int64_t c = xs[k].shape()[1];
    widths.push_back(c);
    for (int64_t n = 0; n < batch; ++n) {
      const double* src = xs[k].value().data() + n * c * spatial;
      std::copy(src, src + c * spatial, out.data() + (n * channels + offsets[k]) * spatial);
    }
  }
  return Var::make(
      std::move(out), xs,
      [offsets, widths, batch, channels, spatial](const Tensor& grad, std::span<Tensor* const> grads) {
        for (size_t k = 0; k < grads.size(); ++k) {
          if (!grads[k]) continue;
          const int64_t c = widths[k];
          for (int64_t n = 0; n < batch; ++n) {
            const double* src = grad.data() + (n * channels + offsets[k]) * spatial;
            double* dst = grads[k]->data() + n * c * spatial;
            for (int64_t i = 0; i < c * spatial; ++i) dst[i] += src[i];
          }
        }
      },
      "concat_channels");
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var::make(
      std::move(out), {&a, &b},
      [](const Tensor& grad, std::span<Tensor* const> grads) {
        for (Tensor* g : grads) {
          if (!g) continue;
          for (int64_t i = 0; i < grad.numel(); ++i) (*g)[i] += grad[i];
        }
      },
      "add");
}

Var mul(const Var& a, const Var& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const bool same = as == bs;
  const bool channel_broadcast =
      as.size() == 4 && bs.size() == 4 && bs[0] == as[0] && bs[1] == as[1] && bs[2] == 1 && bs[3] == 1;
  if (!same && !channel_broadcast) throw ShapeError("mul: " + shape_str(as) + " vs " + shape_str(bs));
  const int64_t spatial = same ? 1 : as[2] * as[3];
  const int64_t groups = a.value().numel() / spatial;
  Tensor out(as);
  for (int64_t gi = 0; gi < groups; ++gi) {
    const double bv = b.value()[gi];
    for (int64_t i = 0; i < spatial; ++i) out[gi * spatial + i] = a.value()[gi * spatial + i] * bv;
  }
  auto av = a.storage();
  auto bvs = b.storage();
  return Var::make(
      std::move(out), {&a, &b},
      [av, bvs, groups, spatial](const Tensor& grad, std::span<Tensor* const> grads) {
        for (int64_t gi = 0; gi < groups; ++gi) {
          const double bv = (*bvs)[gi];
          double acc = 0.0;
          for (int64_t i = 0; i < spatial; ++i) {
            const int64_t k = gi * spatial + i;
            if (grads[0]) (*grads[0])[k] += grad[k] * bv;
            acc += grad[k] * (*av)[k];
          }
          if (grads[1]) (*grads[1])[gi] += acc;
        }
      },
      "mul");
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= factor;
  return Var::make(
      std::move(out), {&x},
      [factor](const Tensor& grad, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t i = 0; i < grad.numel(); ++i) (*grads[0])[i] += grad[i] * factor;
      },
      "scale");
}

Var sum(const Var& x) {
  Tensor out = Tensor::scalar(x.value().sum());
  return Var::make(
      std::move(out), {&x},
      [](const Tensor& grad, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (int64_t i = 0; i < grads[0]->numel(); ++i) (*grads[0])[i] += grad[0];
      },
      "sum");
}

Var l2_normalize(const Var& x) {
  require_rank(x, 2, "l2_normalize");
  const int64_t rows = x.shape()[0];
  const int64_t dim = x.shape()[1];
  Tensor out(x.shape());
  std::vector<double> norms(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* p = x.value().data() + r * dim;
    for (int64_t i = 0; i < dim; ++i) s += p[i] * p[i];
    const double norm = std::sqrt(s);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NumericError("l2_normalize: row " + std::to_string(r) + " has norm " + std::to_string(norm));
    }
    norms[static_cast<size_t>(r)] = norm;
    for (int64_t i = 0; i < dim; ++i) out[r * dim + i] = p[i] / norm;
  }
  Var result = Var::make(std::move(out), {&x}, nullptr, "l2_normalize");
  if (result.node()) {
    auto saved = result.storage();
    result.node()->backward = [saved, norms = std::move(norms), rows, dim](const Tensor& grad,
                                                                         std::span<Tensor* const> grads) {
      if (!grads[0]) return;
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = saved->data() + r * dim;
        const double* g = grad.data() + r * dim;
        double dot = 0.0;
        for (int64_t i = 0; i < dim; ++i) dot += y[i] * g[i];
        const double inv = 1.0 / norms[static_cast<size_t>(r)];
        for (int64_t i = 0; i < dim; ++i) (*grads[0])[r * dim + i] += (g[i] - y[i] * dot) * inv;
      }
    };
  }
  return result;
}

}  // namespace clpolyp::netcore
