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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plasmodium/nn/tensor.hpp"

namespace plasmodium::nn {

enum class LayerKind {
  Input,
  Conv2D,
  SeparableConv2D,
  BatchNorm,
  Activation,
  MaxPool2D,
  AvgPool2D,
  GlobalAvgPool2D,
  ZeroPad2D,
  Flatten,
  Dense,
  Dropout,
  Concatenate,
  Add,
};

enum class Padding { Valid, Same };
enum class Activation { Linear, Relu, Softmax };
enum class Initializer { GlorotUniform, HeUniform };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation activation);

/// Declarative description of one layer. Only the fields relevant to `kind`
/// are meaningful.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Input;
  std::vector<int> inputs;

  Shape input_shape;  // Input only: (h, w, c)

  int units = 0;  // conv filters or dense units
  std::array<int, 2> kernel{1, 1};
  std::array<int, 2> strides{1, 1};
  std::array<int, 2> pool{2, 2};
  Padding padding = Padding::Valid;
  Activation activation = Activation::Linear;
  bool use_bias = true;
  Initializer init = Initializer::GlorotUniform;

  bool bn_scale = true;
  bool bn_center = true;
  float bn_epsilon = 1e-3f;
  float bn_momentum = 0.99f;

  float rate = 0.0f;  // dropout

  std::array<int, 4> zero_pad{1, 1, 1, 1};  // top, bottom, left, right

  bool trainable = true;
};

struct WeightShape {
  std::string name;  // kernel, bias, gamma, beta, moving_mean, ...
  Shape shape;
  bool statistic = false;  // running statistic, never touched by an optimizer
};

/// Directed acyclic layer graph with a single input (layer 0) and a single
/// output (the last layer). Layers are stored in a topological order.
struct LayerGraph {
  std::string name;
  std::vector<LayerSpec> layers;

  int add(LayerSpec spec);
  int find(std::string_view layer_name) const noexcept;
  const LayerSpec& output_layer() const { return layers.back(); }
  Shape input_shape() const;
  std::size_t size() const noexcept { return layers.size(); }
};

/// Per-sample output shape of one layer. Throws ShapeError on incompatible
/// inputs.
Shape output_shape(const LayerSpec& spec, std::span<const Shape> inputs);

/// Per-sample output shapes of every layer; validates the graph structure.
std::vector<Shape> propagate_shapes(const LayerGraph& graph);

/// Weights a layer owns, in the Keras storage order.
std::vector<WeightShape> weight_shapes(const LayerSpec& spec, std::span<const Shape> inputs);

struct ParamCount {
  std::int64_t trainable = 0;
  std::int64_t frozen = 0;
  std::int64_t statistics = 0;  // batch-norm moving mean/variance

  std::int64_t parameters() const noexcept { return trainable + frozen; }
  ParamCount& operator+=(const ParamCount& other) noexcept;
};

/// Per-layer parameter counts under each layer's trainable flag.
std::vector<ParamCount> layer_parameter_counts(const LayerGraph& graph);
ParamCount count_parameters(const LayerGraph& graph);

/// Structural checks: a single Input first, inputs refer to earlier layers,
/// unique names, every layer consumed, shapes propagate.
void validate(const LayerGraph& graph);

/// validate() plus the classifier contract: the output layer is a 2-unit
/// softmax dense layer.
void validate_classifier(const LayerGraph& graph);

/// Layer order Keras assigns to a functional model: decreasing distance to
/// the output, ties broken by depth-first discovery order from the output.
/// Returns old layer indices in the new order.
std::vector<int> keras_layer_order(const LayerGraph& graph);

/// Reorders the layers (a topological permutation) and remaps input indices.
LayerGraph reorder(const LayerGraph& graph, std::span<const int> order);

/// Convenience builder with Keras-style automatic names.
class GraphBuilder {
 public:
  GraphBuilder(std::string name, Shape input_shape, std::string input_name = "input_layer");

  int input() const noexcept { return 0; }

  int conv(int from, int filters, std::array<int, 2> kernel, std::array<int, 2> strides = {1, 1},
           Padding padding = Padding::Valid, Activation act = Activation::Linear, bool use_bias = true,
           std::string name = {}, Initializer init = Initializer::GlorotUniform);
  int separable_conv(int from, int filters, std::array<int, 2> kernel, Padding padding = Padding::Same,
                     bool use_bias = false, std::string name = {});
  int batch_norm(int from, bool scale = true, std::string name = {}, float epsilon = 1e-3f);
  int activation(int from, Activation act, std::string name = {});
  int max_pool(int from, std::array<int, 2> pool, std::array<int, 2> strides, Padding padding = Padding::Valid,
               std::string name = {});
  int avg_pool(int from, std::array<int, 2> pool, std::array<int, 2> strides, Padding padding = Padding::Valid,
               std::string name = {});
  int global_avg_pool(int from, std::string name = {});
  int zero_pad(int from, std::array<int, 4> padding = {1, 1, 1, 1}, std::string name = {});
  int flatten(int from, std::string name = {});
  int dense(int from, int units, Activation act = Activation::Linear, std::string name = {},
            Initializer init = Initializer::GlorotUniform);
  int dropout(int from, float rate, std::string name = {});
  int concat(std::vector<int> from, std::string name = {});
  int add(std::vector<int> from, std::string name = {});

  LayerGraph& graph() noexcept { return graph_; }
  LayerGraph build() &&;

 private:
  int push(LayerSpec spec, std::string_view auto_prefix);

  LayerGraph graph_;
  std::vector<std::pair<std::string, int>> counters_;
};

}  // namespace plasmodium::nn
