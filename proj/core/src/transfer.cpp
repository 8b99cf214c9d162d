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

#include "plasmodium/transfer.hpp"

#include <cstdlib>

#include "plasmodium/error.hpp"
#include "plasmodium/keras_h5.hpp"

namespace plasmodium {

using nn::Activation;
using nn::GraphBuilder;
using nn::Initializer;
using nn::Padding;

namespace {

const nn::Shape kInputShape{128, 128, 3};
constexpr std::string_view kWeightsBaseUrl = "https://storage.googleapis.com/tensorflow/keras-applications/";

struct BackboneInfo {
  const char* name;
  const char* weights;
  const char* url_dir;
};

BackboneInfo info(Backbone b) {
  switch (b) {
    case Backbone::Vgg19: return {"vgg19", "vgg19_weights_tf_dim_ordering_tf_kernels_notop.h5", "vgg19"};
    case Backbone::InceptionV3:
      return {"inceptionv3", "inception_v3_weights_tf_dim_ordering_tf_kernels_notop.h5", "inception_v3"};
    case Backbone::Xception: return {"xception", "xception_weights_tf_dim_ordering_tf_kernels_notop.h5", "xception"};
  }
  throw ConfigError("unknown backbone");
}

int vgg19_body(GraphBuilder& b) {
  int x = b.input();
  const int convs[] = {2, 2, 4, 4, 4};
  const int filters[] = {64, 128, 256, 512, 512};
  for (int blk = 0; blk < 5; ++blk) {
    const std::string prefix = "block" + std::to_string(blk + 1);
    for (int j = 0; j < convs[blk]; ++j) {
      x = b.conv(x, filters[blk], {3, 3}, {1, 1}, Padding::Same, Activation::Relu, true,
                 prefix + "_conv" + std::to_string(j + 1));
    }
    x = b.max_pool(x, {2, 2}, {2, 2}, Padding::Valid, prefix + "_pool");
  }
  return x;
}

int conv_bn(GraphBuilder& b, int x, int filters, int rows, int cols, Padding padding = Padding::Same,
            std::array<int, 2> strides = {1, 1}) {
  x = b.conv(x, filters, {rows, cols}, strides, padding, Activation::Linear, false);
  x = b.batch_norm(x, false);
  return b.activation(x, Activation::Relu);
}

int inception_v3_body(GraphBuilder& b) {
  const auto same1 = std::array<int, 2>{1, 1};
  int x = conv_bn(b, b.input(), 32, 3, 3, Padding::Valid, {2, 2});
  x = conv_bn(b, x, 32, 3, 3, Padding::Valid);
  x = conv_bn(b, x, 64, 3, 3);
  x = b.max_pool(x, {3, 3}, {2, 2});
  x = conv_bn(b, x, 80, 1, 1, Padding::Valid);
  x = conv_bn(b, x, 192, 3, 3, Padding::Valid);
  x = b.max_pool(x, {3, 3}, {2, 2});

  for (int i = 0; i < 3; ++i) {
    const int b1 = conv_bn(b, x, 64, 1, 1);
    int b5 = conv_bn(b, x, 48, 1, 1);
    b5 = conv_bn(b, b5, 64, 5, 5);
    int bd = conv_bn(b, x, 64, 1, 1);
    bd = conv_bn(b, bd, 96, 3, 3);
    bd = conv_bn(b, bd, 96, 3, 3);
    int bp = b.avg_pool(x, {3, 3}, same1, Padding::Same);
    bp = conv_bn(b, bp, i == 0 ? 32 : 64, 1, 1);
    x = b.concat({b1, b5, bd, bp}, "mixed" + std::to_string(i));
  }

  {
    const int b3 = conv_bn(b, x, 384, 3, 3, Padding::Valid, {2, 2});
    int bd = conv_bn(b, x, 64, 1, 1);
    bd = conv_bn(b, bd, 96, 3, 3);
    bd = conv_bn(b, bd, 96, 3, 3, Padding::Valid, {2, 2});
    const int bp = b.max_pool(x, {3, 3}, {2, 2});
    x = b.concat({b3, bd, bp}, "mixed3");
  }

  for (int i = 0; i < 4; ++i) {
    const int w = i == 0 ? 128 : (i < 3 ? 160 : 192);
    const int b1 = conv_bn(b, x, 192, 1, 1);
    int b7 = conv_bn(b, x, w, 1, 1);
    b7 = conv_bn(b, b7, w, 1, 7);
    b7 = conv_bn(b, b7, 192, 7, 1);
    int bd = conv_bn(b, x, w, 1, 1);
    bd = conv_bn(b, bd, w, 7, 1);
    bd = conv_bn(b, bd, w, 1, 7);
    bd = conv_bn(b, bd, w, 7, 1);
    bd = conv_bn(b, bd, 192, 1, 7);
    int bp = b.avg_pool(x, {3, 3}, same1, Padding::Same);
    bp = conv_bn(b, bp, 192, 1, 1);
    x = b.concat({b1, b7, bd, bp}, "mixed" + std::to_string(4 + i));
  }

  {
    int b3 = conv_bn(b, x, 192, 1, 1);
    b3 = conv_bn(b, b3, 320, 3, 3, Padding::Valid, {2, 2});
    int b7 = conv_bn(b, x, 192, 1, 1);
    b7 = conv_bn(b, b7, 192, 1, 7);
    b7 = conv_bn(b, b7, 192, 7, 1);
    b7 = conv_bn(b, b7, 192, 3, 3, Padding::Valid, {2, 2});
    const int bp = b.max_pool(x, {3, 3}, {2, 2});
    x = b.concat({b3, b7, bp}, "mixed8");
  }

  for (int i = 0; i < 2; ++i) {
    const int b1 = conv_bn(b, x, 320, 1, 1);
    int b3 = conv_bn(b, x, 384, 1, 1);
    const int b3a = conv_bn(b, b3, 384, 1, 3);
    const int b3b = conv_bn(b, b3, 384, 3, 1);
    b3 = b.concat({b3a, b3b}, "mixed9_" + std::to_string(i));
    int bd = conv_bn(b, x, 448, 1, 1);
    bd = conv_bn(b, bd, 384, 3, 3);
    const int bda = conv_bn(b, bd, 384, 1, 3);
    const int bdb = conv_bn(b, bd, 384, 3, 1);
    bd = b.concat({bda, bdb});
    int bp = b.avg_pool(x, {3, 3}, same1, Padding::Same);
    bp = conv_bn(b, bp, 192, 1, 1);
    x = b.concat({b1, b3, bd, bp}, "mixed" + std::to_string(9 + i));
  }
  return x;
}

int xception_body(GraphBuilder& b) {
  auto sep_bn = [&](int x, int filters, const std::string& name) {
    x = b.separable_conv(x, filters, {3, 3}, Padding::Same, false, name);
    return b.batch_norm(x, true, name + "_bn");
  };
  auto residual = [&](int x, int filters) {
    const int r = b.conv(x, filters, {1, 1}, {2, 2}, Padding::Same, Activation::Linear, false);
    return b.batch_norm(r);
  };

  int x = b.conv(b.input(), 32, {3, 3}, {2, 2}, Padding::Valid, Activation::Linear, false, "block1_conv1");
  x = b.batch_norm(x, true, "block1_conv1_bn");
  x = b.activation(x, Activation::Relu, "block1_conv1_act");
  x = b.conv(x, 64, {3, 3}, {1, 1}, Padding::Valid, Activation::Linear, false, "block1_conv2");
  x = b.batch_norm(x, true, "block1_conv2_bn");
  x = b.activation(x, Activation::Relu, "block1_conv2_act");

  // Entry flow. Block 2 starts without a leading activation; the activation
  // between its separable convolutions carries the block2_sepconv2_act name.
  int r = residual(x, 128);
  x = sep_bn(x, 128, "block2_sepconv1");
  x = b.activation(x, Activation::Relu, "block2_sepconv2_act");
  x = sep_bn(x, 128, "block2_sepconv2");
  x = b.max_pool(x, {3, 3}, {2, 2}, Padding::Same, "block2_pool");
  x = b.add({x, r});

  for (auto [blk, filters] : {std::pair{3, 256}, std::pair{4, 728}}) {
    const std::string p = "block" + std::to_string(blk);
    r = residual(x, filters);
    x = b.activation(x, Activation::Relu, p + "_sepconv1_act");
    x = sep_bn(x, filters, p + "_sepconv1");
    x = b.activation(x, Activation::Relu, p + "_sepconv2_act");
    x = sep_bn(x, filters, p + "_sepconv2");
    x = b.max_pool(x, {3, 3}, {2, 2}, Padding::Same, p + "_pool");
    x = b.add({x, r});
  }

  for (int blk = 5; blk <= 12; ++blk) {
    const std::string p = "block" + std::to_string(blk);
    r = x;
    for (int j = 1; j <= 3; ++j) {
      const std::string s = p + "_sepconv" + std::to_string(j);
      x = b.activation(x, Activation::Relu, s + "_act");
      x = sep_bn(x, 728, s);
    }
    x = b.add({x, r});
  }

  r = residual(x, 1024);
  x = b.activation(x, Activation::Relu, "block13_sepconv1_act");
  x = sep_bn(x, 728, "block13_sepconv1");
  x = b.activation(x, Activation::Relu, "block13_sepconv2_act");
  x = sep_bn(x, 1024, "block13_sepconv2");
  x = b.max_pool(x, {3, 3}, {2, 2}, Padding::Same, "block13_pool");
  x = b.add({x, r});

  x = sep_bn(x, 1536, "block14_sepconv1");
  x = b.activation(x, Activation::Relu, "block14_sepconv1_act");
  x = sep_bn(x, 2048, "block14_sepconv2");
  return b.activation(x, Activation::Relu, "block14_sepconv2_act");
}

int backbone_body(Backbone backbone, GraphBuilder& b) {
  switch (backbone) {
    case Backbone::Vgg19: return vgg19_body(b);
    case Backbone::InceptionV3: return inception_v3_body(b);
    case Backbone::Xception: return xception_body(b);
  }
  throw ConfigError("unknown backbone");
}

// Block terminals: the last layer (in Keras order) of each block.
std::vector<std::pair<std::string, std::string>> block_terminals(Backbone backbone) {
  std::vector<std::pair<std::string, std::string>> t;
  switch (backbone) {
    case Backbone::Vgg19:
      for (int k = 1; k <= 5; ++k) t.emplace_back("block" + std::to_string(k), "block" + std::to_string(k) + "_pool");
      break;
    case Backbone::InceptionV3:
      t.emplace_back("stem", "max_pooling2d_1");
      for (int k = 0; k <= 10; ++k) t.emplace_back("mixed" + std::to_string(k), "mixed" + std::to_string(k));
      break;
    case Backbone::Xception:
      t.emplace_back("block1", "block1_conv2_act");
      t.emplace_back("block2", "add");
      for (int k = 3; k <= 13; ++k) t.emplace_back("block" + std::to_string(k), "add_" + std::to_string(k - 2));
      t.emplace_back("block14", "block14_sepconv2_act");
      break;
  }
  return t;
}

std::vector<BlockRange> make_blocks(const nn::LayerGraph& graph, Backbone backbone, int head_begin) {
  std::vector<BlockRange> blocks;
  int begin = 0;
  for (const auto& [name, terminal] : block_terminals(backbone)) {
    const int t = graph.find(terminal);
    if (t < begin) throw ShapeError("block '" + name + "' does not follow its predecessor in " + graph.name);
    blocks.push_back({name, begin, t + 1});
    begin = t + 1;
  }
  if (begin != head_begin) throw ShapeError("blocks of " + graph.name + " do not cover the backbone");
  return blocks;
}

nn::LayerGraph keras_ordered(nn::LayerGraph graph) {
  const auto order = nn::keras_layer_order(graph);
  return nn::reorder(graph, order);
}

MaskReport summarize(const nn::LayerGraph& graph) {
  MaskReport r;
  const auto counts = nn::count_parameters(graph);
  for (const auto& l : graph.layers) {
    r.layers.push_back(l.name);
    r.trainable.push_back(l.trainable);
  }
  r.trainable_params = counts.trainable;
  r.frozen_params = counts.frozen;
  r.statistics = counts.statistics;
  return r;
}

void check_mask(const nn::LayerGraph& graph, const RegimeSpec& spec, std::size_t phase) {
  if (phase >= spec.phases.size()) {
    throw ConfigError("regime '" + std::string(to_string(spec.regime)) + "' has no phase " + std::to_string(phase));
  }
  if (spec.phases[phase].trainable.size() != graph.layers.size()) {
    throw ConfigError("regime mask covers " + std::to_string(spec.phases[phase].trainable.size()) +
                      " layers, the model has " + std::to_string(graph.layers.size()));
  }
}

}  // namespace

std::string_view to_string(Backbone backbone) noexcept {
  switch (backbone) {
    case Backbone::Vgg19: return "vgg19";
    case Backbone::InceptionV3: return "inceptionv3";
    case Backbone::Xception: return "xception";
  }
  return "unknown";
}

Backbone parse_backbone(std::string_view text) {
  for (Backbone b : kBackbones) {
    if (text == to_string(b)) return b;
  }
  throw ConfigError("unknown backbone '" + std::string(text) + "' (expected vgg19, inceptionv3 or xception)");
}

std::string_view to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::FrozenHeadOnly: return "frozen";
    case Regime::IncrementalUnfreeze: return "incremental";
    case Regime::FullFineTune: return "full";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  for (Regime r : kRegimes) {
    if (text == to_string(r)) return r;
  }
  throw ConfigError("unknown regime '" + std::string(text) + "' (expected frozen, incremental or full)");
}

BlockRange BackboneSpec::tail_blocks(int count) const {
  if (count < 1 || static_cast<std::size_t>(count) > blocks.size()) throw ConfigError("invalid block count");
  const auto& first = blocks[blocks.size() - count];
  return {first.name + ".." + blocks.back().name, first.begin, blocks.back().end};
}

nn::LayerGraph build_backbone(Backbone backbone) {
  GraphBuilder b(info(backbone).name, kInputShape);
  backbone_body(backbone, b);
  return keras_ordered(std::move(b).build());
}

TransferModel build_transfer_model(Backbone backbone) {
  GraphBuilder b(info(backbone).name, kInputShape);
  int x = backbone_body(backbone, b);
  x = b.global_avg_pool(x);
  x = b.dense(x, 256, Activation::Relu, {}, Initializer::HeUniform);
  x = b.dropout(x, 0.5f);
  b.dense(x, 2, Activation::Softmax);
  TransferModel model{keras_ordered(std::move(b).build()), {}};
  nn::validate_classifier(model.graph);
  model.backbone.name = backbone;
  model.backbone.weights = info(backbone).weights;
  model.backbone.head_begin = model.graph.find("global_average_pooling2d");
  model.backbone.blocks = make_blocks(model.graph, backbone, model.backbone.head_begin);
  return model;
}

RegimeSpec make_regime(Regime regime, const TransferModel& model, const nn::TrainConfig& base,
                       const RegimeBudget& budget) {
  const std::size_t n = model.graph.layers.size();
  const int head = model.backbone.head_begin;
  std::vector<bool> head_only(n, false);
  for (std::size_t i = head; i < n; ++i) head_only[i] = true;

  RegimeSpec spec{regime, {}};
  nn::TrainConfig single = base;
  single.max_epochs = budget.epochs;
  switch (regime) {
    case Regime::FrozenHeadOnly:
      spec.phases.push_back({head_only, single});
      break;
    case Regime::IncrementalUnfreeze: {
      nn::TrainConfig first = base, second = base;
      first.max_epochs = budget.phase1_epochs;
      second.max_epochs = budget.phase2_epochs;
      second.learning_rate = base.learning_rate / 10.0f;
      std::vector<bool> unfrozen = head_only;
      const auto tail = model.backbone.tail_blocks(2);
      for (int i = tail.begin; i < tail.end; ++i) unfrozen[i] = true;
      spec.phases.push_back({head_only, first});
      spec.phases.push_back({unfrozen, second});
      break;
    }
    case Regime::FullFineTune:
      spec.phases.push_back({std::vector<bool>(n, true), single});
      break;
  }
  return spec;
}

MaskReport apply_regime(nn::LayerGraph& graph, const RegimeSpec& spec, std::size_t phase) {
  check_mask(graph, spec, phase);
  for (std::size_t i = 0; i < graph.layers.size(); ++i) graph.layers[i].trainable = spec.phases[phase].trainable[i];
  return summarize(graph);
}

MaskReport apply_regime(nn::Network& network, const RegimeSpec& spec, std::size_t phase) {
  check_mask(network.graph(), spec, phase);
  network.set_trainable(spec.phases[phase].trainable);
  return summarize(network.graph());
}

std::int64_t head_parameter_count(const TransferModel& model) {
  const auto counts = nn::layer_parameter_counts(model.graph);
  std::int64_t total = 0;
  for (std::size_t i = model.backbone.head_begin; i < counts.size(); ++i) total += counts[i].parameters();
  return total;
}

std::filesystem::path default_weights_dir() {
  if (const char* env = std::getenv("PLASMODIUM_WEIGHTS_DIR"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".keras" / "models";
  return ".keras/models";
}

std::filesystem::path snapshot_path(Backbone backbone, const std::filesystem::path& weights_dir) {
  return weights_dir / info(backbone).weights;
}

nn::Network instantiate(const TransferModel& model, WeightsSource source, const std::filesystem::path& weights_dir,
                        std::uint64_t seed) {
  nn::Network network(model.graph, seed);
  if (source == WeightsSource::RandomInit) return network;
  const auto path = snapshot_path(model.backbone.name, weights_dir);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    const auto meta = info(model.backbone.name);
    throw SnapshotUnavailable("pretrained " + std::string(meta.name) + " snapshot not found at " + path.string() +
                                  "; download " + std::string(kWeightsBaseUrl) + meta.url_dir + "/" + meta.weights +
                                  " into that directory or point PLASMODIUM_WEIGHTS_DIR at a copy",
                              path.string());
  }
  load_keras_weights(network, path, model.backbone.head_begin);
  return network;
}

RegimeRun run_regime(const TransferModel& model, const RegimeSpec& spec, std::span<const LabeledImage> corpus,
                     const DatasetSplit& split, std::uint64_t seed, WeightsSource source,
                     const std::filesystem::path& weights_dir, const nn::FitOptions& options) {
  if (split.train.empty() || split.test.empty()) throw ConfigError("transfer runs need non-empty train and test sets");
  RegimeRun run{instantiate(model, source, weights_dir, seed), {}, {}, {}, {}, 0};
  run.initial_backbone_checksum = run.network.checksum(0, model.backbone.head_begin);
  const auto profile = PreprocessProfile::small();
  const nn::ImageSet train{corpus, split.train};
  std::optional<nn::ImageSet> validation;
  if (!split.validation.empty()) validation = nn::ImageSet{corpus, split.validation};
  for (std::size_t phase = 0; phase < spec.phases.size(); ++phase) {
    run.masks.push_back(apply_regime(run.network, spec, phase));
    run.histories.push_back(
        nn::fit(run.network, train, validation, profile, spec.phases[phase].config, seed + phase, options));
  }
  run.test_predictions = nn::evaluate(run.network, nn::ImageSet{corpus, split.test}, profile);
  run.report = to_report(run.test_predictions);
  return run;
}

}  // namespace plasmodium
