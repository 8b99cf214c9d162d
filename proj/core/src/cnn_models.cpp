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

#include "plasmodium/cnn_models.hpp"

#include "plasmodium/error.hpp"

namespace plasmodium {

using nn::Activation;
using nn::Initializer;
using nn::Padding;

std::string_view to_string(CnnArch arch) noexcept { return arch == CnnArch::A ? "a" : "b"; }

CnnArch parse_cnn_arch(std::string_view text) {
  if (text == "a" || text == "A") return CnnArch::A;
  if (text == "b" || text == "B") return CnnArch::B;
  throw ConfigError("unknown CNN architecture '" + std::string(text) + "' (expected a or b)");
}

nn::LayerGraph build_cnn_a(const CnnOptions& options) {
  nn::GraphBuilder b("cnn_a", {128, 128, 3});
  int x = b.input();
  for (int filters : {32, 64, 128}) {
    x = b.conv(x, filters, {3, 3}, {1, 1}, Padding::Valid, Activation::Relu, true, {}, Initializer::HeUniform);
    x = b.batch_norm(x);
    x = b.max_pool(x, {2, 2}, {2, 2});
    x = b.dropout(x, options.conv_dropout);
  }
  x = b.flatten(x);
  x = b.dense(x, 256, Activation::Relu, {}, Initializer::HeUniform);
  x = b.batch_norm(x);
  x = b.dropout(x, options.dense_dropout);
  b.dense(x, 2, Activation::Softmax);
  auto graph = std::move(b).build();
  nn::validate_classifier(graph);
  return graph;
}

nn::LayerGraph build_cnn_b(const CnnOptions& options) {
  nn::GraphBuilder b("cnn_b", {224, 224, 3});
  auto conv = [&](int from, int filters) {
    return b.conv(from, filters, {3, 3}, {1, 1}, Padding::Valid, Activation::Relu, true, {}, Initializer::HeUniform);
  };
  int x = b.input();
  for (int filters : {32, 64}) {
    x = conv(x, filters);
    x = b.zero_pad(x);
    x = conv(x, filters);
    x = conv(x, filters);
    x = b.max_pool(x, {2, 2}, {2, 2});
    x = b.dropout(x, options.conv_dropout);
  }
  x = conv(x, 128);
  x = b.max_pool(x, {2, 2}, {2, 2});
  x = b.dropout(x, options.conv_dropout);
  x = b.flatten(x);
  x = b.dense(x, 256, Activation::Relu, {}, Initializer::HeUniform);
  x = b.dropout(x, options.dense_dropout);
  b.dense(x, 2, Activation::Softmax);
  auto graph = std::move(b).build();
  nn::validate_classifier(graph);
  return graph;
}

nn::LayerGraph build_cnn(CnnArch arch, const CnnOptions& options) {
  return arch == CnnArch::A ? build_cnn_a(options) : build_cnn_b(options);
}

PreprocessProfile cnn_profile(CnnArch arch) {
  return arch == CnnArch::A ? PreprocessProfile::small() : PreprocessProfile::large();
}

nn::TrainConfig cnn_train_config(CnnArch) { return nn::TrainConfig::rmsprop_default(); }

TrainedModel train_model(nn::LayerGraph graph, std::span<const LabeledImage> corpus, const DatasetSplit& split,
                         const PreprocessProfile& profile, const nn::TrainConfig& config, std::uint64_t seed,
                         const nn::FitOptions& options) {
  if (split.train.empty()) throw ConfigError("split has an empty training set");
  nn::validate_classifier(graph);
  TrainedModel model{nn::Network(std::move(graph), seed), {}};
  const nn::ImageSet train{corpus, split.train};
  std::optional<nn::ImageSet> validation;
  if (!split.validation.empty()) validation = nn::ImageSet{corpus, split.validation};
  model.history = nn::fit(model.network, train, validation, profile, config, seed, options);
  return model;
}

EvaluationReport to_report(const nn::Predictions& predictions) {
  const auto cm = confusion(predictions.labels, predictions.predicted);
  const bool both = cm.support(0) > 0 && cm.support(1) > 0;
  if (!both) return report(cm);
  std::vector<double> scores(predictions.positive.begin(), predictions.positive.end());
  return report(cm, predictions.labels, scores);
}

}  // namespace plasmodium
