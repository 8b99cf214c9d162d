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

#pragma once

#include <memory>
#include <random>
#include <span>
#include <vector>

#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/network.hpp"

namespace plasmodium::nn::detail {

struct ForwardState {
  Mode mode = Mode::Inference;
  bool trainable = true;
  bool will_backward = false;  // caches needed by backward() must be kept
  std::mt19937_64* rng = nullptr;
};

struct BackwardState {
  bool param_grads = false;
  bool grad_is_preactivation = false;
};

class Op {
 public:
  Op(const LayerSpec& spec, std::vector<Shape> input_shapes, Shape output_shape);
  virtual ~Op() = default;

  /// `out` arrives shaped (N, output_shape...) and zero-filled.
  virtual void forward(std::span<const Tensor* const> in, Tensor& out, const ForwardState& state) = 0;

  /// `grad_out` may be modified in place. Entries of `grad_in` are null for
  /// inputs that need no gradient; the others accumulate.
  virtual void backward(std::span<const Tensor* const> in, const Tensor& out, Tensor& grad_out,
                        std::span<Tensor* const> grad_in, const BackwardState& state) = 0;

  virtual void release_cache() {}

  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }
  const LayerSpec& spec() const noexcept { return spec_; }

 protected:
  Tensor& param(std::size_t i) { return params_[i].value; }
  Tensor& param_grad(std::size_t i) { return params_[i].grad; }

  LayerSpec spec_;
  std::vector<Shape> input_shapes_;
  Shape output_shape_;
  std::vector<Parameter> params_;
};

std::unique_ptr<Op> make_op(const LayerSpec& spec, int layer_index, const std::vector<Shape>& input_shapes,
                            const Shape& output_shape);

/// Shared kernels, exposed for tests and benchmarks.
void apply_activation(Activation act, float* data, std::size_t rows, std::size_t width);
void activation_backward(Activation act, const float* out, float* grad, std::size_t rows, std::size_t width);

struct ConvGeometry {
  int batch = 0, in_h = 0, in_w = 0, in_c = 0;
  int out_h = 0, out_w = 0;
  int k_h = 1, k_w = 1, s_h = 1, s_w = 1, pad_top = 0, pad_left = 0;

  std::size_t patch() const noexcept { return static_cast<std::size_t>(k_h) * k_w * in_c; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(batch) * out_h * out_w; }
};

ConvGeometry conv_geometry(int batch, const Shape& in, const Shape& out, std::array<int, 2> kernel,
                           std::array<int, 2> strides, Padding padding);
void im2col(const ConvGeometry& g, const float* x, std::size_t row_begin, std::size_t row_end, float* col);
void col2im(const ConvGeometry& g, const float* col, std::size_t row_begin, std::size_t row_end, float* dx);

}  // namespace plasmodium::nn::detail
