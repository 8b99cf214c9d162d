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

#include "plasmodium/nn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "plasmodium/error.hpp"

namespace plasmodium::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Input: return "InputLayer";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::SeparableConv2D: return "SeparableConv2D";
    case LayerKind::BatchNorm: return "BatchNormalization";
    case LayerKind::Activation: return "Activation";
    case LayerKind::MaxPool2D: return "MaxPooling2D";
    case LayerKind::AvgPool2D: return "AveragePooling2D";
    case LayerKind::GlobalAvgPool2D: return "GlobalAveragePooling2D";
    case LayerKind::ZeroPad2D: return "ZeroPadding2D";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Concatenate: return "Concatenate";
    case LayerKind::Add: return "Add";
  }
  return "Unknown";
}

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

int LayerGraph::add(LayerSpec spec) {
  layers.push_back(std::move(spec));
  return static_cast<int>(layers.size()) - 1;
}

int LayerGraph::find(std::string_view layer_name) const noexcept {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == layer_name) return static_cast<int>(i);
  }
  return -1;
}

Shape LayerGraph::input_shape() const {
  if (layers.empty() || layers.front().kind != LayerKind::Input) throw ShapeError("graph has no input layer");
  return layers.front().input_shape;
}

namespace {

[[noreturn]] void shape_fail(const LayerSpec& spec, const std::string& why) {
  throw ShapeError("layer '" + spec.name + "' (" + std::string(to_string(spec.kind)) + "): " + why);
}

const Shape& single_input(const LayerSpec& spec, std::span<const Shape> inputs) {
  if (inputs.size() != 1) shape_fail(spec, "expects exactly one input, got " + std::to_string(inputs.size()));
  return inputs[0];
}

const Shape& image_input(const LayerSpec& spec, std::span<const Shape> inputs) {
  const Shape& in = single_input(spec, inputs);
  if (in.size() != 3) shape_fail(spec, "expects an (h, w, c) input, got " + to_string(in));
  return in;
}

int windowed_extent(const LayerSpec& spec, int in, int window, int stride, Padding padding) {
  if (window < 1 || stride < 1) shape_fail(spec, "window and stride must be positive");
  if (padding == Padding::Same) return (in + stride - 1) / stride;
  if (in < window) {
    shape_fail(spec, "window " + std::to_string(window) + " exceeds input extent " + std::to_string(in));
  }
  return (in - window) / stride + 1;
}

}  // namespace

Shape output_shape(const LayerSpec& spec, std::span<const Shape> inputs) {
  switch (spec.kind) {
    case LayerKind::Input:
      if (!inputs.empty()) shape_fail(spec, "input layers take no inputs");
      if (spec.input_shape.empty() || element_count(spec.input_shape) == 0) shape_fail(spec, "empty input shape");
      return spec.input_shape;
    case LayerKind::Conv2D:
    case LayerKind::SeparableConv2D: {
      const Shape& in = image_input(spec, inputs);
      if (spec.units < 1) shape_fail(spec, "filters must be positive");
      return {windowed_extent(spec, in[0], spec.kernel[0], spec.strides[0], spec.padding),
              windowed_extent(spec, in[1], spec.kernel[1], spec.strides[1], spec.padding), spec.units};
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      const Shape& in = image_input(spec, inputs);
      return {windowed_extent(spec, in[0], spec.pool[0], spec.strides[0], spec.padding),
              windowed_extent(spec, in[1], spec.pool[1], spec.strides[1], spec.padding), in[2]};
    }
    case LayerKind::BatchNorm:
    case LayerKind::Activation:
    case LayerKind::Dropout:
      if (spec.kind == LayerKind::Dropout && !(spec.rate >= 0.0f && spec.rate < 1.0f)) {
        shape_fail(spec, "dropout rate must lie in [0, 1)");
      }
      return single_input(spec, inputs);
    case LayerKind::GlobalAvgPool2D:
      return {image_input(spec, inputs)[2]};
    case LayerKind::ZeroPad2D: {
      const Shape& in = image_input(spec, inputs);
      const auto& p = spec.zero_pad;
      if (*std::min_element(p.begin(), p.end()) < 0) shape_fail(spec, "negative padding");
      return {in[0] + p[0] + p[1], in[1] + p[2] + p[3], in[2]};
    }
    case LayerKind::Flatten:
      return {static_cast<int>(element_count(single_input(spec, inputs)))};
    case LayerKind::Dense: {
      const Shape& in = single_input(spec, inputs);
      if (in.size() != 1) shape_fail(spec, "expects a flat input, got " + to_string(in));
      if (spec.units < 1) shape_fail(spec, "units must be positive");
      return {spec.units};
    }
    case LayerKind::Concatenate: {
      if (inputs.size() < 2) shape_fail(spec, "needs at least two inputs");
      Shape out = inputs[0];
      for (std::size_t k = 1; k < inputs.size(); ++k) {
        const Shape& s = inputs[k];
        if (s.size() != out.size() || !std::equal(s.begin(), s.end() - 1, out.begin())) {
          shape_fail(spec, "incompatible shapes " + to_string(inputs[0]) + " and " + to_string(s));
        }
        out.back() += s.back();
      }
      return out;
    }
    case LayerKind::Add: {
      if (inputs.size() < 2) shape_fail(spec, "needs at least two inputs");
      for (const Shape& s : inputs) {
        if (s != inputs[0]) shape_fail(spec, "incompatible shapes " + to_string(inputs[0]) + " and " + to_string(s));
      }
      return inputs[0];
    }
  }
  shape_fail(spec, "unknown layer kind");
}

std::vector<WeightShape> weight_shapes(const LayerSpec& spec, std::span<const Shape> inputs) {
  std::vector<WeightShape> w;
  switch (spec.kind) {
    case LayerKind::Conv2D: {
      const int cin = image_input(spec, inputs)[2];
      w.push_back({"kernel", {spec.kernel[0], spec.kernel[1], cin, spec.units}, false});
      if (spec.use_bias) w.push_back({"bias", {spec.units}, false});
      break;
    }
    case LayerKind::SeparableConv2D: {
      const int cin = image_input(spec, inputs)[2];
      w.push_back({"depthwise_kernel", {spec.kernel[0], spec.kernel[1], cin, 1}, false});
      w.push_back({"pointwise_kernel", {1, 1, cin, spec.units}, false});
      if (spec.use_bias) w.push_back({"bias", {spec.units}, false});
      break;
    }
    case LayerKind::BatchNorm: {
      const int c = single_input(spec, inputs).back();
      if (spec.bn_scale) w.push_back({"gamma", {c}, false});
      if (spec.bn_center) w.push_back({"beta", {c}, false});
      w.push_back({"moving_mean", {c}, true});
      w.push_back({"moving_variance", {c}, true});
      break;
    }
    case LayerKind::Dense: {
      const int din = single_input(spec, inputs)[0];
      w.push_back({"kernel", {din, spec.units}, false});
      if (spec.use_bias) w.push_back({"bias", {spec.units}, false});
      break;
    }
    default:
      break;
  }
  return w;
}

namespace {

std::vector<Shape> gather(const std::vector<Shape>& shapes, const LayerSpec& spec) {
  std::vector<Shape> in;
  in.reserve(spec.inputs.size());
  for (int j : spec.inputs) in.push_back(shapes[j]);
  return in;
}

}  // namespace

std::vector<Shape> propagate_shapes(const LayerGraph& graph) {
  if (graph.layers.empty()) throw ShapeError("graph '" + graph.name + "' has no layers");
  std::vector<Shape> shapes(graph.layers.size());
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& spec = graph.layers[i];
    if ((i == 0) != (spec.kind == LayerKind::Input)) {
      shape_fail(spec, "the input layer must be first and unique");
    }
    for (int j : spec.inputs) {
      if (j < 0 || static_cast<std::size_t>(j) >= i) shape_fail(spec, "input index " + std::to_string(j) + " is not an earlier layer");
    }
    shapes[i] = output_shape(spec, gather(shapes, spec));
  }
  return shapes;
}

ParamCount& ParamCount::operator+=(const ParamCount& other) noexcept {
  trainable += other.trainable;
  frozen += other.frozen;
  statistics += other.statistics;
  return *this;
}

std::vector<ParamCount> layer_parameter_counts(const LayerGraph& graph) {
  const auto shapes = propagate_shapes(graph);
  std::vector<ParamCount> counts(graph.layers.size());
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& spec = graph.layers[i];
    for (const auto& w : weight_shapes(spec, gather(shapes, spec))) {
      const auto n = static_cast<std::int64_t>(element_count(w.shape));
      if (w.statistic) counts[i].statistics += n;
      else if (spec.trainable) counts[i].trainable += n;
      else counts[i].frozen += n;
    }
  }
  return counts;
}

ParamCount count_parameters(const LayerGraph& graph) {
  ParamCount total;
  for (const auto& c : layer_parameter_counts(graph)) total += c;
  return total;
}

void validate(const LayerGraph& graph) {
  propagate_shapes(graph);
  std::unordered_set<std::string> names;
  std::vector<int> consumers(graph.layers.size(), 0);
  for (const auto& spec : graph.layers) {
    if (spec.name.empty()) throw ShapeError("graph '" + graph.name + "' contains an unnamed layer");
    if (!names.insert(spec.name).second) throw ShapeError("duplicate layer name '" + spec.name + "'");
    for (int j : spec.inputs) ++consumers[j];
  }
  for (std::size_t i = 0; i + 1 < graph.layers.size(); ++i) {
    if (consumers[i] == 0) throw ShapeError("layer '" + graph.layers[i].name + "' is not connected to the output");
  }
}

void validate_classifier(const LayerGraph& graph) {
  validate(graph);
  const LayerSpec& out = graph.output_layer();
  if (out.kind != LayerKind::Dense || out.units != 2 || out.activation != Activation::Softmax) {
    throw ShapeError("graph '" + graph.name + "' must end in a 2-unit softmax dense layer");
  }
}

std::vector<int> keras_layer_order(const LayerGraph& graph) {
  const int n = static_cast<int>(graph.layers.size());
  if (n == 0) return {};

  // Depth-first traversal from the output, inputs visited in declaration
  // order; discovery index recorded on first visit.
  std::vector<int> discovery(n, -1);
  std::vector<int> postorder;
  postorder.reserve(n);
  int counter = 0;
  std::vector<std::pair<int, std::size_t>> stack{{n - 1, 0}};
  discovery[n - 1] = counter++;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& inputs = graph.layers[node].inputs;
    if (next < inputs.size()) {
      const int parent = inputs[next++];
      if (discovery[parent] < 0) {
        discovery[parent] = counter++;
        stack.push_back({parent, 0});
      }
      continue;
    }
    postorder.push_back(node);
    stack.pop_back();
  }
  if (static_cast<int>(postorder.size()) != n) {
    throw ShapeError("graph '" + graph.name + "' has layers unreachable from the output");
  }

  std::vector<int> depth(n, 0);
  for (auto it = postorder.rbegin(); it != postorder.rend(); ++it) {
    for (int parent : graph.layers[*it].inputs) depth[parent] = std::max(depth[parent], depth[*it] + 1);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (depth[a] != depth[b]) return depth[a] > depth[b];
    return discovery[a] < discovery[b];
  });
  return order;
}

LayerGraph reorder(const LayerGraph& graph, std::span<const int> order) {
  if (order.size() != graph.layers.size()) throw ShapeError("layer order has the wrong length");
  std::vector<int> position(graph.layers.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] < 0 || static_cast<std::size_t>(order[k]) >= graph.layers.size() || position[order[k]] >= 0) {
      throw ShapeError("layer order is not a permutation");
    }
    position[order[k]] = static_cast<int>(k);
  }
  LayerGraph out;
  out.name = graph.name;
  for (std::size_t k = 0; k < order.size(); ++k) {
    LayerSpec spec = graph.layers[order[k]];
    for (int& j : spec.inputs) {
      j = position[j];
      if (j >= static_cast<int>(k)) throw ShapeError("layer order is not topological at '" + spec.name + "'");
    }
    out.layers.push_back(std::move(spec));
  }
  return out;
}

GraphBuilder::GraphBuilder(std::string name, Shape input_shape, std::string input_name) {
  graph_.name = std::move(name);
  LayerSpec input;
  input.name = std::move(input_name);
  input.kind = LayerKind::Input;
  input.input_shape = std::move(input_shape);
  graph_.add(std::move(input));
}

int GraphBuilder::push(LayerSpec spec, std::string_view auto_prefix) {
  if (spec.name.empty()) {
    auto it = std::find_if(counters_.begin(), counters_.end(), [&](const auto& c) { return c.first == auto_prefix; });
    if (it == counters_.end()) {
      counters_.emplace_back(std::string(auto_prefix), 1);
      spec.name = std::string(auto_prefix);
    } else {
      spec.name = std::string(auto_prefix) + "_" + std::to_string(it->second++);
    }
  }
  return graph_.add(std::move(spec));
}

int GraphBuilder::conv(int from, int filters, std::array<int, 2> kernel, std::array<int, 2> strides, Padding padding,
                       Activation act, bool use_bias, std::string name, Initializer init) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Conv2D;
  s.inputs = {from};
  s.units = filters;
  s.kernel = kernel;
  s.strides = strides;
  s.padding = padding;
  s.activation = act;
  s.use_bias = use_bias;
  s.init = init;
  return push(std::move(s), "conv2d");
}

int GraphBuilder::separable_conv(int from, int filters, std::array<int, 2> kernel, Padding padding, bool use_bias,
                                 std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::SeparableConv2D;
  s.inputs = {from};
  s.units = filters;
  s.kernel = kernel;
  s.padding = padding;
  s.use_bias = use_bias;
  return push(std::move(s), "separable_conv2d");
}

int GraphBuilder::batch_norm(int from, bool scale, std::string name, float epsilon) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::BatchNorm;
  s.inputs = {from};
  s.bn_scale = scale;
  s.bn_epsilon = epsilon;
  return push(std::move(s), "batch_normalization");
}

int GraphBuilder::activation(int from, Activation act, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Activation;
  s.inputs = {from};
  s.activation = act;
  return push(std::move(s), "activation");
}

int GraphBuilder::max_pool(int from, std::array<int, 2> pool, std::array<int, 2> strides, Padding padding,
                           std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::MaxPool2D;
  s.inputs = {from};
  s.pool = pool;
  s.strides = strides;
  s.padding = padding;
  return push(std::move(s), "max_pooling2d");
}

int GraphBuilder::avg_pool(int from, std::array<int, 2> pool, std::array<int, 2> strides, Padding padding,
                           std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::AvgPool2D;
  s.inputs = {from};
  s.pool = pool;
  s.strides = strides;
  s.padding = padding;
  return push(std::move(s), "average_pooling2d");
}

int GraphBuilder::global_avg_pool(int from, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::GlobalAvgPool2D;
  s.inputs = {from};
  return push(std::move(s), "global_average_pooling2d");
}

int GraphBuilder::zero_pad(int from, std::array<int, 4> padding, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::ZeroPad2D;
  s.inputs = {from};
  s.zero_pad = padding;
  return push(std::move(s), "zero_padding2d");
}

int GraphBuilder::flatten(int from, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Flatten;
  s.inputs = {from};
  return push(std::move(s), "flatten");
}

int GraphBuilder::dense(int from, int units, Activation act, std::string name, Initializer init) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Dense;
  s.inputs = {from};
  s.units = units;
  s.activation = act;
  s.init = init;
  return push(std::move(s), "dense");
}

int GraphBuilder::dropout(int from, float rate, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Dropout;
  s.inputs = {from};
  s.rate = rate;
  return push(std::move(s), "dropout");
}

int GraphBuilder::concat(std::vector<int> from, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Concatenate;
  s.inputs = std::move(from);
  return push(std::move(s), "concatenate");
}

int GraphBuilder::add(std::vector<int> from, std::string name) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Add;
  s.inputs = std::move(from);
  return push(std::move(s), "add");
}

LayerGraph GraphBuilder::build() && {
  validate(graph_);
  return std::move(graph_);
}

}  // namespace plasmodium::nn
