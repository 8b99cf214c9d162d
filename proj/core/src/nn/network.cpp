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

#include "plasmodium/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ops.hpp"
#include "plasmodium/checksum.hpp"
#include "plasmodium/error.hpp"

namespace plasmodium::nn {

namespace {

Shape batched(int n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

bool is_kernel(const std::string& weight) {
  return weight == "kernel" || weight == "depthwise_kernel" || weight == "pointwise_kernel";
}

// Keras fan computation: dense kernels are (in, out), conv kernels carry a
// receptive field in their leading dimensions.
std::pair<double, double> fans(const Shape& shape) {
  if (shape.size() == 2) return {static_cast<double>(shape[0]), static_cast<double>(shape[1])};
  double receptive = 1.0;
  for (std::size_t i = 0; i + 2 < shape.size(); ++i) receptive *= shape[i];
  return {shape[shape.size() - 2] * receptive, shape.back() * receptive};
}

void initialize(Parameter& p, Initializer init, std::mt19937_64& gen) {
  if (p.weight == "gamma" || p.weight == "moving_variance") {
    p.value.fill(1.0f);
    return;
  }
  if (!is_kernel(p.weight)) {
    p.value.fill(0.0f);
    return;
  }
  const auto [fan_in, fan_out] = fans(p.value.shape());
  const double limit =
      init == Initializer::HeUniform ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<float> dist(static_cast<float>(-limit), static_cast<float>(limit));
  for (float& v : p.value.values()) v = dist(gen);
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  Shape s = t.shape();
  const std::size_t row = t.size() / static_cast<std::size_t>(s[0]);
  s[0] = static_cast<int>(end - begin);
  std::vector<float> values(t.data() + begin * row, t.data() + end * row);
  return Tensor(std::move(s), std::move(values));
}

}  // namespace

Network::Network(LayerGraph graph, std::uint64_t seed) : graph_(std::move(graph)) {
  validate(graph_);
  shapes_ = propagate_shapes(graph_);
  const std::size_t n = graph_.layers.size();
  consumers_.assign(n, {});
  ops_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& spec = graph_.layers[i];
    std::vector<Shape> in;
    for (int j : spec.inputs) {
      in.push_back(shapes_[j]);
      consumers_[j].push_back(static_cast<int>(i));
    }
    ops_[i] = detail::make_op(spec, static_cast<int>(i), in, shapes_[i]);
    if (!ops_[i]) continue;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 gen(seq);
    for (auto& p : ops_[i]->params()) initialize(p, spec.init, gen);
  }
  rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  activations_.resize(n);
}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

std::vector<bool> Network::requires_grad() const {
  std::vector<bool> req(graph_.layers.size(), false);
  for (std::size_t i = 1; i < graph_.layers.size(); ++i) {
    const auto& params = ops_[i]->params();
    bool learns = graph_.layers[i].trainable &&
                  std::any_of(params.begin(), params.end(), [](const Parameter& p) { return !p.statistic; });
    for (int j : graph_.layers[i].inputs) learns = learns || req[j];
    req[i] = learns;
  }
  return req;
}

void Network::release_activations() {
  for (auto& a : activations_) a.release();
  for (auto& op : ops_) {
    if (op) op->release_cache();
  }
  has_forward_ = false;
}

const Tensor& Network::forward(const Tensor& batch, Mode mode) {
  const Shape& in = shapes_.front();
  if (batch.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), batch.shape().begin() + 1) ||
      batch.dim(0) < 1) {
    throw ShapeError("network '" + graph_.name + "' expects batches of " + to_string(in) + ", got " +
                     to_string(batch.shape()));
  }
  release_activations();
  const std::size_t n = graph_.layers.size();
  const int rows = batch.dim(0);
  req_ = mode == Mode::Training ? requires_grad() : std::vector<bool>(n, false);
  std::vector<bool> keep(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = req_[i] || std::any_of(consumers_[i].begin(), consumers_[i].end(), [&](int c) { return req_[c]; });
  }
  std::vector<int> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = static_cast<int>(consumers_[i].size());

  activations_[0] = batch;
  std::vector<const Tensor*> inputs;
  for (std::size_t i = 1; i < n; ++i) {
    const LayerSpec& spec = graph_.layers[i];
    inputs.clear();
    for (int j : spec.inputs) inputs.push_back(&activations_[j]);
    activations_[i] = Tensor(batched(rows, shapes_[i]));
    detail::ForwardState state{mode, spec.trainable, req_[i], &rng_};
    ops_[i]->forward(inputs, activations_[i], state);
    for (int j : spec.inputs) {
      if (--remaining[j] == 0 && !keep[j]) activations_[j].release();
    }
  }
  last_mode_ = mode;
  has_forward_ = true;
  return activations_.back();
}

Tensor Network::predict(const Tensor& batch, int chunk) {
  if (batch.rank() < 1 || batch.dim(0) == 0) throw ShapeError("predict needs a non-empty batch");
  const std::size_t total = batch.dim(0), step = std::max(chunk, 1);
  Tensor out(batched(static_cast<int>(total), shapes_.back()));
  const std::size_t width = out.size() / total;
  for (std::size_t r0 = 0; r0 < total; r0 += step) {
    const std::size_t r1 = std::min(total, r0 + step);
    const Tensor& y = (r0 == 0 && r1 == total) ? forward(batch, Mode::Inference)
                                               : forward(slice_rows(batch, r0, r1), Mode::Inference);
    std::copy_n(y.data(), y.size(), out.data() + r0 * width);
  }
  release_activations();
  return out;
}

void Network::backward(const Tensor& grad, bool grad_is_logits) {
  if (!has_forward_ || last_mode_ != Mode::Training) {
    throw Error("backward() requires a preceding training-mode forward()");
  }
  const std::size_t n = graph_.layers.size(), last = n - 1;
  if (grad.shape() != activations_[last].shape()) {
    throw ShapeError("output gradient shape " + to_string(grad.shape()) + " does not match " +
                     to_string(activations_[last].shape()));
  }
  const int rows = grad.dim(0);
  std::vector<Tensor> grads(n);
  grads[last] = grad;
  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> grad_inputs;
  for (std::size_t i = last; i >= 1; --i) {
    if (req_[i] && !grads[i].empty()) {
      const LayerSpec& spec = graph_.layers[i];
      inputs.clear();
      grad_inputs.clear();
      for (int j : spec.inputs) {
        inputs.push_back(&activations_[j]);
        if (req_[j]) {
          if (grads[j].empty()) grads[j] = Tensor(batched(rows, shapes_[j]));
          grad_inputs.push_back(&grads[j]);
        } else {
          grad_inputs.push_back(nullptr);
        }
      }
      const bool output_softmax = spec.activation == Activation::Softmax &&
                                  (spec.kind == LayerKind::Dense || spec.kind == LayerKind::Conv2D ||
                                   spec.kind == LayerKind::SeparableConv2D || spec.kind == LayerKind::Activation);
      detail::BackwardState state{spec.trainable, i == last && grad_is_logits && output_softmax};
      ops_[i]->backward(inputs, activations_[i], grads[i], grad_inputs, state);
    }
    grads[i].release();
    activations_[i].release();
    ops_[i]->release_cache();
  }
  release_activations();
}

void Network::zero_grad() {
  for (auto& op : ops_) {
    if (!op) continue;
    for (auto& p : op->params()) {
      if (!p.statistic) p.grad.fill(0.0f);
    }
  }
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& op : ops_) {
    if (!op) continue;
    for (auto& p : op->params()) out.push_back(&p);
  }
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& op : ops_) {
    if (!op) continue;
    for (const auto& p : op->params()) out.push_back(&p);
  }
  return out;
}

std::span<Parameter> Network::layer_parameters(int layer) {
  auto& op = ops_.at(layer);
  return op ? std::span<Parameter>(op->params()) : std::span<Parameter>();
}

std::span<const Parameter> Network::layer_parameters(int layer) const {
  const auto& op = ops_.at(layer);
  return op ? std::span<const Parameter>(op->params()) : std::span<const Parameter>();
}

Parameter* Network::find_parameter(std::string_view name) {
  for (auto* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void Network::set_trainable(int layer, bool trainable) { graph_.layers.at(layer).trainable = trainable; }

void Network::set_trainable(const std::vector<bool>& mask) {
  if (mask.size() != graph_.layers.size()) throw ConfigError("trainable mask has the wrong length");
  for (std::size_t i = 0; i < mask.size(); ++i) graph_.layers[i].trainable = mask[i];
}

std::vector<bool> Network::trainable_mask() const {
  std::vector<bool> mask;
  for (const auto& l : graph_.layers) mask.push_back(l.trainable);
  return mask;
}

std::uint64_t Network::checksum() const { return checksum(0, static_cast<int>(ops_.size())); }

std::uint64_t Network::checksum(int first_layer, int end_layer) const {
  std::uint64_t h = kFnvOffsetBasis;
  for (int i = std::max(first_layer, 0); i < std::min<int>(end_layer, ops_.size()); ++i) {
    if (!ops_[i]) continue;
    for (const auto& p : ops_[i]->params()) h = fnv1a64(p.value.values(), h);
  }
  return h;
}

std::vector<Tensor> Network::snapshot() const {
  std::vector<Tensor> out;
  for (const auto* p : parameters()) out.push_back(p->value);
  return out;
}

void Network::restore(const std::vector<Tensor>& weights) {
  auto params = parameters();
  if (weights.size() != params.size()) throw ShapeError("weight snapshot has the wrong number of tensors");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (weights[i].shape() != params[i]->value.shape()) {
      throw ShapeError("weight snapshot shape mismatch for " + params[i]->name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = weights[i];
}

}  // namespace plasmodium::nn
