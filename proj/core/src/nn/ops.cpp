/**
 * Copyright 2026 The Plasmodium Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "plasmodium/error.hpp"

namespace plasmodium::nn::detail {

namespace {

constexpr std::size_t kColumnBudget = std::size_t{1} << 24;  // floats per im2col chunk

// Row-major C[m x n] = op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
          float* c, float beta) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == 0.0f) std::fill(c, c + m * n, 0.0f);
    return;
  }
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, a,
              static_cast<int>(trans_a ? m : k), b, static_cast<int>(trans_b ? k : n), beta, c, static_cast<int>(n));
}

std::vector<float>& scratch(std::size_t n) {
  thread_local std::vector<float> buffer;
  if (buffer.size() < n) buffer.resize(n);
  return buffer;
}

std::size_t batch_of(const Tensor& t) { return static_cast<std::size_t>(t.dim(0)); }

void add_into(float* dst, const float* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void add_bias(float* out, const float* bias, std::size_t rows, std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
    float* o = out + r * width;
    for (std::size_t c = 0; c < width; ++c) o[c] += bias[c];
  }
}

void accumulate_bias_grad(const float* grad, std::size_t rows, std::size_t width, float* db) {
  std::vector<double> acc(width, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* g = grad + r * width;
    for (std::size_t c = 0; c < width; ++c) acc[c] += g[c];
  }
  for (std::size_t c = 0; c < width; ++c) db[c] += static_cast<float>(acc[c]);
}

Parameter make_param(const LayerSpec& spec, int layer, const WeightShape& w) {
  Parameter p;
  p.name = spec.name + "/" + w.name;
  p.weight = w.name;
  p.layer = layer;
  p.statistic = w.statistic;
  p.value = Tensor(w.shape);
  if (!w.statistic) p.grad = Tensor(w.shape);
  return p;
}

class Conv2DOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    const Tensor& x = *in[0];
    const auto g = geometry(batch_of(x));
    const std::size_t k = g.patch(), co = spec_.units, rows = g.rows();
    const float* w = param(0).data();
    if (pointwise()) {
      gemm(false, false, rows, co, k, x.data(), w, out.data(), 0.0f);
    } else {
      const std::size_t step = std::max<std::size_t>(1, kColumnBudget / k);
      auto& col = scratch(std::min(rows, step) * k);
      for (std::size_t r0 = 0; r0 < rows; r0 += step) {
        const std::size_t r1 = std::min(rows, r0 + step);
        im2col(g, x.data(), r0, r1, col.data());
        gemm(false, false, r1 - r0, co, k, col.data(), w, out.data() + r0 * co, 0.0f);
      }
    }
    if (spec_.use_bias) add_bias(out.data(), param(1).data(), rows, co);
    apply_activation(spec_.activation, out.data(), rows, co);
  }

  void backward(std::span<const Tensor* const> in, const Tensor& out, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState& state) override {
    const Tensor& x = *in[0];
    const auto g = geometry(batch_of(x));
    const std::size_t k = g.patch(), co = spec_.units, rows = g.rows();
    if (!state.grad_is_preactivation) activation_backward(spec_.activation, out.data(), gy.data(), rows, co);
    if (state.param_grads && spec_.use_bias) accumulate_bias_grad(gy.data(), rows, co, param_grad(1).data());
    const float* w = param(0).data();
    float* dx = grad_in[0] ? grad_in[0]->data() : nullptr;
    if (pointwise()) {
      if (state.param_grads) gemm(true, false, k, co, rows, x.data(), gy.data(), param_grad(0).data(), 1.0f);
      if (dx) gemm(false, true, rows, k, co, gy.data(), w, dx, 1.0f);
      return;
    }
    if (!state.param_grads && !dx) return;
    const std::size_t step = std::max<std::size_t>(1, kColumnBudget / k);
    auto& col = scratch(std::min(rows, step) * k);
    for (std::size_t r0 = 0; r0 < rows; r0 += step) {
      const std::size_t r1 = std::min(rows, r0 + step);
      const float* gchunk = gy.data() + r0 * co;
      if (state.param_grads) {
        im2col(g, x.data(), r0, r1, col.data());
        gemm(true, false, k, co, r1 - r0, col.data(), gchunk, param_grad(0).data(), 1.0f);
      }
      if (dx) {
        gemm(false, true, r1 - r0, k, co, gchunk, w, col.data(), 0.0f);
        col2im(g, col.data(), r0, r1, dx);
      }
    }
  }

 private:
  bool pointwise() const noexcept {
    return spec_.kernel == std::array<int, 2>{1, 1} && spec_.strides == std::array<int, 2>{1, 1};
  }
  ConvGeometry geometry(std::size_t n) const {
    return conv_geometry(static_cast<int>(n), input_shapes_[0], output_shape_, spec_.kernel, spec_.strides,
                         spec_.padding);
  }
};

class SeparableConvOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState& state) override {
    const Tensor& x = *in[0];
    const auto g = geometry(batch_of(x));
    const std::size_t ci = g.in_c, co = spec_.units, rows = g.rows();
    mid_.reset({g.batch, g.out_h, g.out_w, g.in_c});
    depthwise_forward(g, x.data(), param(0).data(), mid_.data());
    gemm(false, false, rows, co, ci, mid_.data(), param(1).data(), out.data(), 0.0f);
    if (spec_.use_bias) add_bias(out.data(), param(2).data(), rows, co);
    apply_activation(spec_.activation, out.data(), rows, co);
    if (!state.will_backward) mid_.release();
  }

  void backward(std::span<const Tensor* const> in, const Tensor& out, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState& state) override {
    const Tensor& x = *in[0];
    const auto g = geometry(batch_of(x));
    const std::size_t ci = g.in_c, co = spec_.units, rows = g.rows();
    if (mid_.empty()) throw Error("separable conv '" + spec_.name + "' has no cached forward pass");
    if (!state.grad_is_preactivation) activation_backward(spec_.activation, out.data(), gy.data(), rows, co);
    if (state.param_grads) {
      if (spec_.use_bias) accumulate_bias_grad(gy.data(), rows, co, param_grad(2).data());
      gemm(true, false, ci, co, rows, mid_.data(), gy.data(), param_grad(1).data(), 1.0f);
    }
    float* dx = grad_in[0] ? grad_in[0]->data() : nullptr;
    if (!dx && !state.param_grads) return;
    Tensor dmid({g.batch, g.out_h, g.out_w, g.in_c});
    gemm(false, true, rows, ci, co, gy.data(), param(1).data(), dmid.data(), 0.0f);
    depthwise_backward(g, x.data(), param(0).data(), dmid.data(), state.param_grads ? param_grad(0).data() : nullptr,
                       dx);
  }

  void release_cache() override { mid_.release(); }

 private:
  ConvGeometry geometry(std::size_t n) const {
    return conv_geometry(static_cast<int>(n), input_shapes_[0], output_shape_, spec_.kernel, spec_.strides,
                         spec_.padding);
  }

  static void depthwise_forward(const ConvGeometry& g, const float* x, const float* w, float* y) {
    const int c = g.in_c;
    for (int n = 0; n < g.batch; ++n) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          float* o = y + ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * c;
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy * g.s_h - g.pad_top + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox * g.s_w - g.pad_left + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              const float* xi = x + ((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) * c;
              const float* wk = w + (static_cast<std::size_t>(ky) * g.k_w + kx) * c;
              for (int ch = 0; ch < c; ++ch) o[ch] += xi[ch] * wk[ch];
            }
          }
        }
      }
    }
  }

  static void depthwise_backward(const ConvGeometry& g, const float* x, const float* w, const float* gy, float* dw,
                                 float* dx) {
    const int c = g.in_c;
    for (int n = 0; n < g.batch; ++n) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          const float* go = gy + ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * c;
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy * g.s_h - g.pad_top + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox * g.s_w - g.pad_left + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              const std::size_t at = ((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) * c;
              const std::size_t wk = (static_cast<std::size_t>(ky) * g.k_w + kx) * c;
              if (dw) {
                for (int ch = 0; ch < c; ++ch) dw[wk + ch] += x[at + ch] * go[ch];
              }
              if (dx) {
                for (int ch = 0; ch < c; ++ch) dx[at + ch] += w[wk + ch] * go[ch];
              }
            }
          }
        }
      }
    }
  }

  Tensor mid_;
};

class BatchNormOp final : public Op {
 public:
  BatchNormOp(const LayerSpec& spec, std::vector<Shape> in, Shape out) : Op(spec, std::move(in), std::move(out)) {}

  void bind() {
    std::size_t i = 0;
    gamma_ = spec_.bn_scale ? static_cast<int>(i++) : -1;
    beta_ = spec_.bn_center ? static_cast<int>(i++) : -1;
    mean_idx_ = static_cast<int>(i++);
    var_idx_ = static_cast<int>(i++);
  }

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState& state) override {
    const Tensor& x = *in[0];
    const std::size_t c = output_shape_.back(), m = x.size() / c;
    mean_.assign(c, 0.0f);
    inv_std_.assign(c, 0.0f);
    used_batch_ = state.mode == Mode::Training && state.trainable;
    float* moving_mean = param(mean_idx_).data();
    float* moving_var = param(var_idx_).data();
    if (used_batch_) {
      std::vector<double> sum(c, 0.0), sq(c, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        const float* xr = x.data() + r * c;
        for (std::size_t k = 0; k < c; ++k) sum[k] += xr[k];
      }
      for (std::size_t k = 0; k < c; ++k) sum[k] /= static_cast<double>(m);
      for (std::size_t r = 0; r < m; ++r) {
        const float* xr = x.data() + r * c;
        for (std::size_t k = 0; k < c; ++k) {
          const double d = xr[k] - sum[k];
          sq[k] += d * d;
        }
      }
      const float momentum = spec_.bn_momentum;
      for (std::size_t k = 0; k < c; ++k) {
        const double var = sq[k] / static_cast<double>(m);
        mean_[k] = static_cast<float>(sum[k]);
        inv_std_[k] = static_cast<float>(1.0 / std::sqrt(var + spec_.bn_epsilon));
        moving_mean[k] = moving_mean[k] * momentum + static_cast<float>(sum[k]) * (1.0f - momentum);
        moving_var[k] = moving_var[k] * momentum + static_cast<float>(var) * (1.0f - momentum);
      }
    } else {
      for (std::size_t k = 0; k < c; ++k) {
        mean_[k] = moving_mean[k];
        inv_std_[k] = 1.0f / std::sqrt(moving_var[k] + spec_.bn_epsilon);
      }
    }
    std::vector<float> scale(c), shift(c);
    for (std::size_t k = 0; k < c; ++k) {
      const float gamma = gamma_ >= 0 ? param(gamma_)[k] : 1.0f;
      const float beta = beta_ >= 0 ? param(beta_)[k] : 0.0f;
      scale[k] = gamma * inv_std_[k];
      shift[k] = beta - mean_[k] * scale[k];
    }
    for (std::size_t r = 0; r < m; ++r) {
      const float* xr = x.data() + r * c;
      float* yr = out.data() + r * c;
      for (std::size_t k = 0; k < c; ++k) yr[k] = xr[k] * scale[k] + shift[k];
    }
  }

  void backward(std::span<const Tensor* const> in, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState& state) override {
    const Tensor& x = *in[0];
    const std::size_t c = output_shape_.back(), m = x.size() / c;
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const float* xr = x.data() + r * c;
      const float* gr = gy.data() + r * c;
      for (std::size_t k = 0; k < c; ++k) {
        sum_g[k] += gr[k];
        sum_gx[k] += static_cast<double>(gr[k]) * (xr[k] - mean_[k]) * inv_std_[k];
      }
    }
    if (state.param_grads) {
      for (std::size_t k = 0; k < c; ++k) {
        if (gamma_ >= 0) param_grad(gamma_)[k] += static_cast<float>(sum_gx[k]);
        if (beta_ >= 0) param_grad(beta_)[k] += static_cast<float>(sum_g[k]);
      }
    }
    if (!grad_in[0]) return;
    float* dx = grad_in[0]->data();
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<float> a(c), b(c), d(c);
    for (std::size_t k = 0; k < c; ++k) {
      const float gamma = gamma_ >= 0 ? param(gamma_)[k] : 1.0f;
      a[k] = gamma * inv_std_[k];
      if (used_batch_) {
        b[k] = static_cast<float>(sum_g[k] * inv_m);
        d[k] = static_cast<float>(sum_gx[k] * inv_m);
      }
    }
    for (std::size_t r = 0; r < m; ++r) {
      const float* xr = x.data() + r * c;
      const float* gr = gy.data() + r * c;
      float* dr = dx + r * c;
      if (used_batch_) {
        for (std::size_t k = 0; k < c; ++k) {
          const float xhat = (xr[k] - mean_[k]) * inv_std_[k];
          dr[k] += a[k] * (gr[k] - b[k] - xhat * d[k]);
        }
      } else {
        for (std::size_t k = 0; k < c; ++k) dr[k] += a[k] * gr[k];
      }
    }
  }

 private:
  int gamma_ = -1, beta_ = -1, mean_idx_ = 0, var_idx_ = 1;
  bool used_batch_ = false;
  std::vector<float> mean_, inv_std_;
};

class ActivationOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    std::copy_n(in[0]->data(), out.size(), out.data());
    const std::size_t width = output_shape_.back();
    apply_activation(spec_.activation, out.data(), out.size() / width, width);
  }

  void backward(std::span<const Tensor* const>, const Tensor& out, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState& state) override {
    if (!grad_in[0]) return;
    const std::size_t width = output_shape_.back();
    if (!state.grad_is_preactivation) activation_backward(spec_.activation, out.data(), gy.data(), out.size() / width, width);
    add_into(grad_in[0]->data(), gy.data(), gy.size());
  }
};

class PoolOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState& state) override {
    const Tensor& x = *in[0];
    const auto g = geometry(batch_of(x));
    const int c = g.in_c;
    const bool is_max = spec_.kind == LayerKind::MaxPool2D;
    if (is_max && state.will_backward) argmax_.assign(out.size(), 0);
    else argmax_.clear();
    for (int n = 0; n < g.batch; ++n) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          const std::size_t at = ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * c;
          float* o = out.data() + at;
          if (is_max) std::fill(o, o + c, -std::numeric_limits<float>::infinity());
          int count = 0;
          for (int ky = 0; ky < g.k_h; ++ky) {
            const int iy = oy * g.s_h - g.pad_top + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int ix = ox * g.s_w - g.pad_left + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              ++count;
              const std::size_t src = ((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) * c;
              const float* xi = x.data() + src;
              if (!is_max) {
                for (int ch = 0; ch < c; ++ch) o[ch] += xi[ch];
              } else if (argmax_.empty()) {
                for (int ch = 0; ch < c; ++ch) o[ch] = std::max(o[ch], xi[ch]);
              } else {
                for (int ch = 0; ch < c; ++ch) {
                  if (xi[ch] > o[ch]) {
                    o[ch] = xi[ch];
                    argmax_[at + ch] = static_cast<std::uint32_t>(src + ch);
                  }
                }
              }
            }
          }
          if (!is_max) {
            const float inv = 1.0f / static_cast<float>(count);
            for (int ch = 0; ch < c; ++ch) o[ch] *= inv;
          }
        }
      }
    }
  }

  void backward(std::span<const Tensor* const> in, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    if (!grad_in[0]) return;
    float* dx = grad_in[0]->data();
    if (spec_.kind == LayerKind::MaxPool2D) {
      if (argmax_.size() != gy.size()) throw Error("max pool '" + spec_.name + "' has no cached forward pass");
      for (std::size_t i = 0; i < gy.size(); ++i) dx[argmax_[i]] += gy[i];
      return;
    }
    const auto g = geometry(batch_of(*in[0]));
    const int c = g.in_c;
    for (int n = 0; n < g.batch; ++n) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          const int y0 = std::max(0, oy * g.s_h - g.pad_top), y1 = std::min(g.in_h, oy * g.s_h - g.pad_top + g.k_h);
          const int x0 = std::max(0, ox * g.s_w - g.pad_left), x1 = std::min(g.in_w, ox * g.s_w - g.pad_left + g.k_w);
          const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
          const float* go = gy.data() + ((static_cast<std::size_t>(n) * g.out_h + oy) * g.out_w + ox) * c;
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) {
              float* d = dx + ((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) * c;
              for (int ch = 0; ch < c; ++ch) d[ch] += go[ch] * inv;
            }
          }
        }
      }
    }
  }

  void release_cache() override {
    argmax_.clear();
    argmax_.shrink_to_fit();
  }

 private:
  ConvGeometry geometry(std::size_t n) const {
    return conv_geometry(static_cast<int>(n), input_shapes_[0], output_shape_, spec_.pool, spec_.strides,
                         spec_.padding);
  }

  std::vector<std::uint32_t> argmax_;
};

class GlobalAvgPoolOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    const Tensor& x = *in[0];
    const std::size_t n = batch_of(x), c = input_shapes_[0][2];
    const std::size_t hw = static_cast<std::size_t>(input_shapes_[0][0]) * input_shapes_[0][1];
    std::vector<double> acc(c);
    for (std::size_t b = 0; b < n; ++b) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const float* xb = x.data() + b * hw * c;
      for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t k = 0; k < c; ++k) acc[k] += xb[p * c + k];
      }
      for (std::size_t k = 0; k < c; ++k) out[b * c + k] = static_cast<float>(acc[k] / static_cast<double>(hw));
    }
  }

  void backward(std::span<const Tensor* const> in, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    if (!grad_in[0]) return;
    const std::size_t n = batch_of(*in[0]), c = input_shapes_[0][2];
    const std::size_t hw = static_cast<std::size_t>(input_shapes_[0][0]) * input_shapes_[0][1];
    const float inv = 1.0f / static_cast<float>(hw);
    float* dx = grad_in[0]->data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        float* d = dx + (b * hw + p) * c;
        for (std::size_t k = 0; k < c; ++k) d[k] += gy[b * c + k] * inv;
      }
    }
  }
};

class ZeroPadOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    visit(batch_of(*in[0]), [&](float* padded, const float* plain, std::size_t len) { std::memcpy(padded, plain, len * sizeof(float)); },
          out.data(), in[0]->data());
  }

  void backward(std::span<const Tensor* const> in, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    if (!grad_in[0]) return;
    visit(batch_of(*in[0]), [&](float* padded, float* plain, std::size_t len) { add_into(plain, padded, len); },
          gy.data(), grad_in[0]->data());
  }

 private:
  template <typename F, typename P>
  void visit(std::size_t n, F&& f, float* padded, P* plain) const {
    const int h = input_shapes_[0][0], w = input_shapes_[0][1], c = input_shapes_[0][2];
    const int ph = output_shape_[0], pw = output_shape_[1];
    const auto& p = spec_.zero_pad;
    for (std::size_t b = 0; b < n; ++b) {
      for (int y = 0; y < h; ++y) {
        float* dst = padded + ((b * ph + y + p[0]) * pw + p[2]) * c;
        P* src = plain + ((b * h + y) * w) * c;
        f(dst, src, static_cast<std::size_t>(w) * c);
      }
    }
  }
};

class FlattenOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    std::copy_n(in[0]->data(), out.size(), out.data());
  }

  void backward(std::span<const Tensor* const>, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    if (grad_in[0]) add_into(grad_in[0]->data(), gy.data(), gy.size());
  }
};

class DenseOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    const Tensor& x = *in[0];
    const std::size_t n = batch_of(x), din = input_shapes_[0][0], units = spec_.units;
    gemm(false, false, n, units, din, x.data(), param(0).data(), out.data(), 0.0f);
    if (spec_.use_bias) add_bias(out.data(), param(1).data(), n, units);
    apply_activation(spec_.activation, out.data(), n, units);
  }

  void backward(std::span<const Tensor* const> in, const Tensor& out, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState& state) override {
    const Tensor& x = *in[0];
    const std::size_t n = batch_of(x), din = input_shapes_[0][0], units = spec_.units;
    if (!state.grad_is_preactivation) activation_backward(spec_.activation, out.data(), gy.data(), n, units);
    if (state.param_grads) {
      gemm(true, false, din, units, n, x.data(), gy.data(), param_grad(0).data(), 1.0f);
      if (spec_.use_bias) accumulate_bias_grad(gy.data(), n, units, param_grad(1).data());
    }
    if (grad_in[0]) gemm(false, true, n, din, units, gy.data(), param(0).data(), grad_in[0]->data(), 1.0f);
  }
};

class DropoutOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState& state) override {
    const Tensor& x = *in[0];
    mask_.clear();
    if (state.mode != Mode::Training || spec_.rate <= 0.0f) {
      std::copy_n(x.data(), x.size(), out.data());
      return;
    }
    const float keep_scale = 1.0f / (1.0f - spec_.rate);
    std::vector<float> mask(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const float u = static_cast<float>((*state.rng)() >> 40) * 0x1.0p-24f;
      mask[i] = u >= spec_.rate ? keep_scale : 0.0f;
      out[i] = x[i] * mask[i];
    }
    if (state.will_backward) mask_ = std::move(mask);
  }

  void backward(std::span<const Tensor* const>, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    if (!grad_in[0]) return;
    float* dx = grad_in[0]->data();
    if (mask_.empty()) {
      add_into(dx, gy.data(), gy.size());
    } else {
      for (std::size_t i = 0; i < gy.size(); ++i) dx[i] += gy[i] * mask_[i];
    }
  }

  void release_cache() override {
    mask_.clear();
    mask_.shrink_to_fit();
  }

 private:
  std::vector<float> mask_;
};

class ConcatOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    const std::size_t total = output_shape_.back(), rows = out.size() / total;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t width = input_shapes_[k].back();
      const float* src = in[k]->data();
      for (std::size_t r = 0; r < rows; ++r) std::memcpy(out.data() + r * total + offset, src + r * width, width * sizeof(float));
      offset += width;
    }
  }

  void backward(std::span<const Tensor* const>, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    const std::size_t total = output_shape_.back(), rows = gy.size() / total;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < grad_in.size(); ++k) {
      const std::size_t width = input_shapes_[k].back();
      if (grad_in[k]) {
        float* dst = grad_in[k]->data();
        for (std::size_t r = 0; r < rows; ++r) add_into(dst + r * width, gy.data() + r * total + offset, width);
      }
      offset += width;
    }
  }
};

class AddOp final : public Op {
 public:
  using Op::Op;

  void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState&) override {
    for (const Tensor* t : in) add_into(out.data(), t->data(), out.size());
  }

  void backward(std::span<const Tensor* const>, const Tensor&, Tensor& gy, std::span<Tensor* const> grad_in,
                const BackwardState&) override {
    for (Tensor* d : grad_in) {
      if (d) add_into(d->data(), gy.data(), gy.size());
    }
  }
};

}  // namespace

Op::Op(const LayerSpec& spec, std::vector<Shape> input_shapes, Shape output_shape)
    : spec_(spec), input_shapes_(std::move(input_shapes)), output_shape_(std::move(output_shape)) {}

std::unique_ptr<Op> make_op(const LayerSpec& spec, int layer_index, const std::vector<Shape>& input_shapes,
                            const Shape& output_shape) {
  std::unique_ptr<Op> op;
  switch (spec.kind) {
    case LayerKind::Input: return nullptr;
    case LayerKind::Conv2D: op = std::make_unique<Conv2DOp>(spec, input_shapes, output_shape); break;
    case LayerKind::SeparableConv2D: op = std::make_unique<SeparableConvOp>(spec, input_shapes, output_shape); break;
    case LayerKind::BatchNorm: op = std::make_unique<BatchNormOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Activation: op = std::make_unique<ActivationOp>(spec, input_shapes, output_shape); break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: op = std::make_unique<PoolOp>(spec, input_shapes, output_shape); break;
    case LayerKind::GlobalAvgPool2D: op = std::make_unique<GlobalAvgPoolOp>(spec, input_shapes, output_shape); break;
    case LayerKind::ZeroPad2D: op = std::make_unique<ZeroPadOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Flatten: op = std::make_unique<FlattenOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Dense: op = std::make_unique<DenseOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Dropout: op = std::make_unique<DropoutOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Concatenate: op = std::make_unique<ConcatOp>(spec, input_shapes, output_shape); break;
    case LayerKind::Add: op = std::make_unique<AddOp>(spec, input_shapes, output_shape); break;
  }
  for (const auto& w : weight_shapes(spec, input_shapes)) op->params().push_back(make_param(spec, layer_index, w));
  if (auto* bn = dynamic_cast<BatchNormOp*>(op.get())) bn->bind();
  return op;
}

void apply_activation(Activation act, float* data, std::size_t rows, std::size_t width) {
  switch (act) {
    case Activation::Linear: return;
    case Activation::Relu:
      for (std::size_t i = 0; i < rows * width; ++i) data[i] = std::max(data[i], 0.0f);
      return;
    case Activation::Softmax:
      for (std::size_t r = 0; r < rows; ++r) {
        float* x = data + r * width;
        const float peak = *std::max_element(x, x + width);
        double sum = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
          x[k] = std::exp(x[k] - peak);
          sum += x[k];
        }
        const auto inv = static_cast<float>(1.0 / sum);
        for (std::size_t k = 0; k < width; ++k) x[k] *= inv;
      }
      return;
  }
}

void activation_backward(Activation act, const float* out, float* grad, std::size_t rows, std::size_t width) {
  switch (act) {
    case Activation::Linear: return;
    case Activation::Relu:
      for (std::size_t i = 0; i < rows * width; ++i) {
        if (out[i] <= 0.0f) grad[i] = 0.0f;
      }
      return;
    case Activation::Softmax:
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = out + r * width;
        float* g = grad + r * width;
        double dot = 0.0;
        for (std::size_t k = 0; k < width; ++k) dot += static_cast<double>(g[k]) * y[k];
        for (std::size_t k = 0; k < width; ++k) g[k] = y[k] * (g[k] - static_cast<float>(dot));
      }
      return;
  }
}

ConvGeometry conv_geometry(int batch, const Shape& in, const Shape& out, std::array<int, 2> kernel,
                           std::array<int, 2> strides, Padding padding) {
  ConvGeometry g;
  g.batch = batch;
  g.in_h = in[0];
  g.in_w = in[1];
  g.in_c = in[2];
  g.out_h = out[0];
  g.out_w = out[1];
  g.k_h = kernel[0];
  g.k_w = kernel[1];
  g.s_h = strides[0];
  g.s_w = strides[1];
  if (padding == Padding::Same) {
    g.pad_top = std::max((g.out_h - 1) * g.s_h + g.k_h - g.in_h, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * g.s_w + g.k_w - g.in_w, 0) / 2;
  }
  return g;
}

void im2col(const ConvGeometry& g, const float* x, std::size_t row_begin, std::size_t row_end, float* col) {
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t k = g.patch(), c = g.in_c;
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const std::size_t n = r / plane, rem = r % plane;
    const int oy = static_cast<int>(rem / g.out_w), ox = static_cast<int>(rem % g.out_w);
    float* dst = col + (r - row_begin) * k;
    const int x_origin = ox * g.s_w - g.pad_left;
    const int kx0 = std::max(0, -x_origin), kx1 = std::min(g.k_w, g.in_w - x_origin);
    for (int ky = 0; ky < g.k_h; ++ky) {
      float* row = dst + static_cast<std::size_t>(ky) * g.k_w * c;
      const int iy = oy * g.s_h - g.pad_top + ky;
      if (iy < 0 || iy >= g.in_h || kx0 >= kx1) {
        std::fill(row, row + g.k_w * c, 0.0f);
        continue;
      }
      std::fill(row, row + kx0 * c, 0.0f);
      const float* src = x + ((n * g.in_h + iy) * g.in_w + (x_origin + kx0)) * c;
      std::memcpy(row + kx0 * c, src, (kx1 - kx0) * c * sizeof(float));
      std::fill(row + kx1 * c, row + g.k_w * c, 0.0f);
    }
  }
}

void col2im(const ConvGeometry& g, const float* col, std::size_t row_begin, std::size_t row_end, float* dx) {
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t k = g.patch(), c = g.in_c;
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const std::size_t n = r / plane, rem = r % plane;
    const int oy = static_cast<int>(rem / g.out_w), ox = static_cast<int>(rem % g.out_w);
    const float* src = col + (r - row_begin) * k;
    const int x_origin = ox * g.s_w - g.pad_left;
    const int kx0 = std::max(0, -x_origin), kx1 = std::min(g.k_w, g.in_w - x_origin);
    if (kx0 >= kx1) continue;
    for (int ky = 0; ky < g.k_h; ++ky) {
      const int iy = oy * g.s_h - g.pad_top + ky;
      if (iy < 0 || iy >= g.in_h) continue;
      float* dst = dx + ((n * g.in_h + iy) * g.in_w + (x_origin + kx0)) * c;
      add_into(dst, src + (static_cast<std::size_t>(ky) * g.k_w + kx0) * c, (kx1 - kx0) * c);
    }
  }
}

}  // namespace plasmodium::nn::detail
