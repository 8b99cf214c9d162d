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

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/tensor.hpp"

namespace plasmodium::nn {

namespace detail {
class Op;
}

enum class Mode { Inference, Training };

struct Parameter {
  std::string name;    // "<layer>/<weight>"
  std::string weight;  // kernel, bias, gamma, moving_mean, ...
  int layer = 0;
  bool statistic = false;
  Tensor value;
  Tensor grad;  // empty for statistics
};

/// Executable form of a LayerGraph: owns the weights, runs batched forward
/// and backward passes. Batches are NHWC for image inputs, (N, d) for flat
/// inputs.
class Network {
 public:
  explicit Network(LayerGraph graph, std::uint64_t seed = 0);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const LayerGraph& graph() const noexcept { return graph_; }
  const std::vector<Shape>& layer_shapes() const noexcept { return shapes_; }
  Shape input_shape() const { return shapes_.front(); }
  int output_units() const { return shapes_.back().back(); }

  /// Runs the whole batch and returns the output layer activations. In
  /// training mode intermediate activations are kept for backward().
  const Tensor& forward(const Tensor& batch, Mode mode);

  /// Inference over an arbitrarily large batch in chunks.
  Tensor predict(const Tensor& batch, int chunk = 32);

  /// Backpropagates from the output layer. When `grad_is_logits` is set and
  /// the output activation is softmax, `grad` is taken with respect to the
  /// pre-softmax values. Parameter gradients accumulate; call zero_grad().
  void backward(const Tensor& grad, bool grad_is_logits = true);
  void zero_grad();

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::span<Parameter> layer_parameters(int layer);
  std::span<const Parameter> layer_parameters(int layer) const;
  Parameter* find_parameter(std::string_view name);

  void set_trainable(int layer, bool trainable);
  void set_trainable(const std::vector<bool>& mask);
  bool is_trainable(int layer) const { return graph_.layers.at(layer).trainable; }
  std::vector<bool> trainable_mask() const;
  ParamCount parameter_counts() const { return count_parameters(graph_); }

  /// FNV-1a over every weight (statistics included) of the given layers, or
  /// of the whole network.
  std::uint64_t checksum() const;
  std::uint64_t checksum(int first_layer, int end_layer) const;

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& weights);

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  std::vector<bool> requires_grad() const;
  void release_activations();

  LayerGraph graph_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<detail::Op>> ops_;
  std::vector<std::vector<int>> consumers_;
  std::vector<Tensor> activations_;
  std::vector<bool> req_;
  Mode last_mode_ = Mode::Inference;
  bool has_forward_ = false;
  std::mt19937_64 rng_;
};

}  // namespace plasmodium::nn
