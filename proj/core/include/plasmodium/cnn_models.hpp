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
#include <span>
#include <string_view>

#include "plasmodium/dataset.hpp"
#include "plasmodium/metrics.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/nn/trainer.hpp"
#include "plasmodium/preprocess.hpp"

namespace plasmodium {

enum class CnnArch { A, B };

std::string_view to_string(CnnArch arch) noexcept;
CnnArch parse_cnn_arch(std::string_view text);

struct CnnOptions {
  float conv_dropout = 0.25f;
  float dense_dropout = 0.5f;
};

/// Three [conv 3x3 ReLU -> batch norm -> max pool 2x2 -> dropout] blocks with
/// 32/64/128 filters, then dense 256 ReLU -> batch norm -> dropout -> dense 2
/// softmax. Input 128x128x3.
nn::LayerGraph build_cnn_a(const CnnOptions& options = {});

/// conv32 -> zero pad -> conv32 -> conv32 -> pool -> dropout, the same group
/// with 64 filters, conv128 -> pool -> dropout, then dense 256 ReLU ->
/// dropout -> dense 2 softmax. Input 224x224x3, He-uniform ReLU layers.
nn::LayerGraph build_cnn_b(const CnnOptions& options = {});

nn::LayerGraph build_cnn(CnnArch arch, const CnnOptions& options = {});
PreprocessProfile cnn_profile(CnnArch arch);
nn::TrainConfig cnn_train_config(CnnArch arch);

struct TrainedModel {
  nn::Network network;
  nn::TrainingHistory history;
};

/// Trains `graph` on split.train, monitoring split.validation.
TrainedModel train_model(nn::LayerGraph graph, std::span<const LabeledImage> corpus, const DatasetSplit& split,
                         const PreprocessProfile& profile, const nn::TrainConfig& config, std::uint64_t seed,
                         const nn::FitOptions& options = {});

/// Confusion matrix and metrics (with AUC when both classes are present) of
/// a prediction run.
EvaluationReport to_report(const nn::Predictions& predictions);

}  // namespace plasmodium
