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

#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "plasmodium/cnn_models.hpp"
#include "plasmodium/error.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/transfer.hpp"
#include "synthetic.hpp"

namespace plasmodium {
namespace {

using namespace nn;

std::string keras_class(LayerKind kind) {
  static const std::map<LayerKind, std::string> names{
      {LayerKind::Input, "InputLayer"},
      {LayerKind::Conv2D, "Conv2D"},
      {LayerKind::SeparableConv2D, "SeparableConv2D"},
      {LayerKind::BatchNorm, "BatchNormalization"},
      {LayerKind::Activation, "Activation"},
      {LayerKind::MaxPool2D, "MaxPooling2D"},
      {LayerKind::AvgPool2D, "AveragePooling2D"},
      {LayerKind::GlobalAvgPool2D, "GlobalAveragePooling2D"},
      {LayerKind::ZeroPad2D, "ZeroPadding2D"},
      {LayerKind::Flatten, "Flatten"},
      {LayerKind::Dense, "Dense"},
      {LayerKind::Dropout, "Dropout"},
      {LayerKind::Concatenate, "Concatenate"},
      {LayerKind::Add, "Add"},
  };
  return names.at(kind);
}

void expect_matches_keras(const LayerGraph& graph, const std::string& key) {
  const auto fx = testing::read_json(testing::fixture_path("keras/architectures.json")).at(key);
  const auto& layers = fx.at("layers");
  ASSERT_EQ(graph.size(), layers.size()) << key;
  const auto shapes = propagate_shapes(graph);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& spec = graph.layers[i];
    const auto& want = layers[i];
    SCOPED_TRACE(key + " layer " + std::to_string(i) + " " + spec.name);
    ASSERT_EQ(spec.name, want.at("name").get<std::string>());
    EXPECT_EQ(keras_class(spec.kind), want.at("class_name").get<std::string>());
    EXPECT_EQ(shapes[i], want.at("output_shape").get<Shape>());
    std::vector<std::string> inbound;
    std::vector<Shape> in_shapes;
    for (int j : spec.inputs) {
      inbound.push_back(graph.layers[j].name);
      in_shapes.push_back(shapes[j]);
    }
    EXPECT_EQ(inbound, want.at("inbound").get<std::vector<std::string>>());
    const auto weights = weight_shapes(spec, in_shapes);
    ASSERT_EQ(weights.size(), want.at("weights").size());
    for (std::size_t w = 0; w < weights.size(); ++w) {
      EXPECT_EQ(weights[w].name, want.at("weights")[w].at("name").get<std::string>());
      EXPECT_EQ(weights[w].shape, want.at("weights")[w].at("shape").get<Shape>());
      EXPECT_EQ(weights[w].statistic, !want.at("weights")[w].at("trainable").get<bool>());
    }
  }
  const auto counts = count_parameters(graph);
  EXPECT_EQ(counts.parameters() + counts.statistics, fx.at("total_params").get<std::int64_t>());
  EXPECT_EQ(counts.trainable, fx.at("trainable_params").get<std::int64_t>());
  EXPECT_EQ(counts.statistics, fx.at("statistics").get<std::int64_t>());
}

TEST(KerasArchitecture, CnnA) { expect_matches_keras(build_cnn_a(), "cnn_a"); }
TEST(KerasArchitecture, CnnB) { expect_matches_keras(build_cnn_b(), "cnn_b"); }
TEST(KerasArchitecture, Vgg19) { expect_matches_keras(build_transfer_model(Backbone::Vgg19).graph, "vgg19"); }
TEST(KerasArchitecture, InceptionV3) {
  expect_matches_keras(build_transfer_model(Backbone::InceptionV3).graph, "inceptionv3");
}
TEST(KerasArchitecture, Xception) { expect_matches_keras(build_transfer_model(Backbone::Xception).graph, "xception"); }

TEST(CnnModels, ClassifierContractAndProfiles) {
  for (auto arch : {CnnArch::A, CnnArch::B}) {
    const auto g = build_cnn(arch);
    EXPECT_NO_THROW(validate_classifier(g));
    EXPECT_EQ(g.input_shape(), (Shape{cnn_profile(arch).target_size.height, cnn_profile(arch).target_size.width, 3}));
  }
  EXPECT_EQ(cnn_profile(CnnArch::A).target_size, (TargetSize{128, 128}));
  EXPECT_EQ(cnn_profile(CnnArch::B).target_size, (TargetSize{224, 224}));
  EXPECT_EQ(parse_cnn_arch("b"), CnnArch::B);
  EXPECT_THROW(parse_cnn_arch("c"), ConfigError);
}

TEST(CnnModels, DropoutRatesComeFromOptions) {
  const auto g = build_cnn_a({.conv_dropout = 0.1f, .dense_dropout = 0.3f});
  std::vector<float> rates;
  for (const auto& l : g.layers)
    if (l.kind == LayerKind::Dropout) rates.push_back(l.rate);
  EXPECT_EQ(rates, (std::vector<float>{0.1f, 0.1f, 0.1f, 0.3f}));
}

TEST(Shapes, ConvPoolAndPaddingArithmetic) {
  LayerSpec conv;
  conv.kind = LayerKind::Conv2D;
  conv.units = 8;
  conv.kernel = {3, 3};
  conv.strides = {2, 2};
  const std::vector<Shape> in{{15, 16, 3}};
  EXPECT_EQ(output_shape(conv, in), (Shape{7, 7, 8}));
  conv.padding = Padding::Same;
  EXPECT_EQ(output_shape(conv, in), (Shape{8, 8, 8}));
  LayerSpec pad;
  pad.kind = LayerKind::ZeroPad2D;
  pad.zero_pad = {1, 0, 2, 3};
  EXPECT_EQ(output_shape(pad, in), (Shape{16, 21, 3}));
  LayerSpec flat;
  flat.kind = LayerKind::Flatten;
  EXPECT_EQ(output_shape(flat, in), (Shape{15 * 16 * 3}));
  LayerSpec big = conv;
  big.padding = Padding::Valid;
  big.kernel = {17, 3};
  EXPECT_THROW(output_shape(big, in), ShapeError);
}

TEST(Shapes, MergeLayersCheckTheirInputs) {
  LayerSpec add;
  add.kind = LayerKind::Add;
  const std::vector<Shape> same{{4, 4, 2}, {4, 4, 2}}, differ{{4, 4, 2}, {4, 4, 3}};
  EXPECT_EQ(output_shape(add, same), (Shape{4, 4, 2}));
  EXPECT_THROW(output_shape(add, differ), ShapeError);
  LayerSpec cat;
  cat.kind = LayerKind::Concatenate;
  EXPECT_EQ(output_shape(cat, differ), (Shape{4, 4, 5}));
}

TEST(Graph, ValidationCatchesStructuralErrors) {
  GraphBuilder b("g", {4, 4, 3});
  const int c = b.conv(b.input(), 2, {1, 1});
  b.dense(b.flatten(c), 2, Activation::Softmax);
  auto g = std::move(b).build();
  EXPECT_NO_THROW(validate_classifier(g));

  auto dup = g;
  dup.layers[2].name = dup.layers[1].name;
  EXPECT_THROW(validate(dup), ShapeError);

  auto dangling = g;
  LayerSpec extra;
  extra.name = "unused";
  extra.kind = LayerKind::Dropout;
  extra.inputs = {1};
  dangling.layers.insert(dangling.layers.begin() + 2, extra);
  for (auto& l : dangling.layers)
    for (int& in : l.inputs)
      if (&l != &dangling.layers[2] && in >= 2) ++in;
  EXPECT_THROW(validate(dangling), ShapeError);

  auto forward_ref = g;
  forward_ref.layers[1].inputs = {2};
  EXPECT_THROW(validate(forward_ref), ShapeError);

  GraphBuilder three("h", {4, 4, 3});
  three.dense(three.flatten(three.input()), 3, Activation::Softmax);
  EXPECT_THROW(validate_classifier(std::move(three).build()), ShapeError);
}

TEST(Graph, BuilderNamesFollowKerasCounters) {
  GraphBuilder b("g", {8, 8, 3});
  const int a = b.conv(b.input(), 2, {3, 3}, {1, 1}, Padding::Same);
  const int c = b.conv(a, 2, {3, 3}, {1, 1}, Padding::Same);
  const int s = b.add({a, c});
  b.dense(b.flatten(s), 2, Activation::Softmax);
  const auto g = std::move(b).build();
  std::vector<std::string> names;
  for (const auto& l : g.layers) names.push_back(l.name);
  EXPECT_EQ(names, (std::vector<std::string>{"input_layer", "conv2d", "conv2d_1", "add", "flatten", "dense"}));
  EXPECT_EQ(g.find("add"), 3);
  EXPECT_EQ(g.find("nope"), -1);
}

TEST(Graph, KerasOrderSortsByDistanceToOutput) {
  // Two branches of different depth joined by a concatenation.
  GraphBuilder b("g", {4, 4, 1});
  const int shallow = b.conv(b.input(), 1, {1, 1}, {1, 1}, Padding::Valid, Activation::Linear, true, "shallow");
  const int d1 = b.conv(b.input(), 1, {1, 1}, {1, 1}, Padding::Valid, Activation::Linear, true, "deep_1");
  const int d2 = b.conv(d1, 1, {1, 1}, {1, 1}, Padding::Valid, Activation::Linear, true, "deep_2");
  const int cat = b.concat({shallow, d2}, "cat");
  b.dense(b.flatten(cat, "flat"), 2, Activation::Softmax, "out");
  const auto g = std::move(b).build();
  const auto order = keras_layer_order(g);
  const auto r = reorder(g, order);
  std::vector<std::string> names;
  for (const auto& l : r.layers) names.push_back(l.name);
  EXPECT_EQ(names, (std::vector<std::string>{"input_layer", "deep_1", "shallow", "deep_2", "cat", "flat", "out"}));
  EXPECT_NO_THROW(validate(r));
  EXPECT_EQ(r.layers[r.find("cat")].inputs, (std::vector<int>{r.find("shallow"), r.find("deep_2")}));
}

TEST(Graph, FrozenLayersMoveParametersOutOfTrainable) {
  auto g = build_cnn_a();
  const auto before = count_parameters(g);
  for (auto& l : g.layers) l.trainable = false;
  const auto after = count_parameters(g);
  EXPECT_EQ(after.trainable, 0);
  EXPECT_EQ(after.frozen, before.trainable + before.frozen);
  EXPECT_EQ(after.statistics, before.statistics);
  std::int64_t sum = 0;
  for (const auto& c : layer_parameter_counts(g)) sum += c.parameters();
  EXPECT_EQ(sum, after.parameters());
}

}  // namespace
}  // namespace plasmodium
