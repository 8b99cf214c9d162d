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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plasmodium/cnn_models.hpp"
#include "plasmodium/dataset.hpp"
#include "plasmodium/metrics.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/nn/trainer.hpp"
#include "plasmodium/preprocess.hpp"

namespace plasmodium {

enum class Backbone { Vgg19, InceptionV3, Xception };

std::string_view to_string(Backbone backbone) noexcept;
Backbone parse_backbone(std::string_view text);
inline constexpr std::array<Backbone, 3> kBackbones{Backbone::Vgg19, Backbone::InceptionV3, Backbone::Xception};

/// A named contiguous range [begin, end) of layer indices.
struct BlockRange {
  std::string name;
  int begin = 0;
  int end = 0;
};

struct BackboneSpec {
  Backbone name = Backbone::Vgg19;
  std::string weights;        // snapshot file name inside the weights directory
  std::vector<BlockRange> blocks;  // cover layers [0, head_begin) in order
  int head_begin = 0;              // first layer of the classification head

  /// The last `count` backbone blocks as one layer range.
  BlockRange tail_blocks(int count) const;
};

/// Backbone (no ImageNet classifier) plus the project head: global average
/// pool -> dense 256 ReLU -> dropout 0.5 -> dense 2 softmax. Input 128x128x3,
/// layers in Keras order.
struct TransferModel {
  nn::LayerGraph graph;
  BackboneSpec backbone;
};

TransferModel build_transfer_model(Backbone backbone);

/// Backbone alone, without the head.
nn::LayerGraph build_backbone(Backbone backbone);

enum class Regime { FrozenHeadOnly, IncrementalUnfreeze, FullFineTune };

std::string_view to_string(Regime regime) noexcept;
Regime parse_regime(std::string_view text);
inline constexpr std::array<Regime, 3> kRegimes{Regime::FrozenHeadOnly, Regime::IncrementalUnfreeze,
                                                Regime::FullFineTune};

struct RegimePhase {
  std::vector<bool> trainable;  // per layer
  nn::TrainConfig config;
};

struct RegimeSpec {
  Regime regime = Regime::FrozenHeadOnly;
  std::vector<RegimePhase> phases;
};

/// Epoch budgets: single-phase regimes use `epochs`; incremental unfreezing
/// uses `phase1_epochs` then `phase2_epochs` at learning_rate / 10.
struct RegimeBudget {
  int epochs = 50;
  int phase1_epochs = 15;
  int phase2_epochs = 35;
};

RegimeSpec make_regime(Regime regime, const TransferModel& model, const nn::TrainConfig& base = nn::TrainConfig::sgd_default(),
                       const RegimeBudget& budget = {});

struct MaskReport {
  std::vector<std::string> layers;
  std::vector<bool> trainable;
  std::int64_t trainable_params = 0;
  std::int64_t frozen_params = 0;
  std::int64_t statistics = 0;  // batch-norm moving statistics, never trained
};

/// Sets the phase's trainable flags on the graph and reports the counts.
/// Throws ConfigError when the mask does not fit the graph.
MaskReport apply_regime(nn::LayerGraph& graph, const RegimeSpec& spec, std::size_t phase);
MaskReport apply_regime(nn::Network& network, const RegimeSpec& spec, std::size_t phase);

/// Parameters of the head layers alone.
std::int64_t head_parameter_count(const TransferModel& model);

enum class WeightsSource { Pretrained, RandomInit };

/// `$PLASMODIUM_WEIGHTS_DIR`, else `~/.keras/models`.
std::filesystem::path default_weights_dir();
std::filesystem::path snapshot_path(Backbone backbone, const std::filesystem::path& weights_dir);

/// Instantiates the model; with Pretrained the backbone weights come from the
/// Keras ImageNet snapshot. Throws SnapshotUnavailable naming the expected
/// path when the snapshot is missing.
nn::Network instantiate(const TransferModel& model, WeightsSource source, const std::filesystem::path& weights_dir,
                        std::uint64_t seed);

struct RegimeRun {
  nn::Network network;
  std::vector<nn::TrainingHistory> histories;  // one per phase
  std::vector<MaskReport> masks;
  nn::Predictions test_predictions;
  EvaluationReport report;
  std::uint64_t initial_backbone_checksum = 0;
};

/// Runs every phase on split.train (validation on split.validation) and
/// evaluates on split.test.
RegimeRun run_regime(const TransferModel& model, const RegimeSpec& spec, std::span<const LabeledImage> corpus,
                     const DatasetSplit& split, std::uint64_t seed, WeightsSource source,
                     const std::filesystem::path& weights_dir, const nn::FitOptions& options = {});

}  // namespace plasmodium
