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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plasmodium/dataset.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/nn/optimizer.hpp"
#include "plasmodium/preprocess.hpp"

namespace plasmodium::nn {

/// Early stopping, best-checkpoint restore and LR reduction, all monitoring
/// validation loss (training loss when no validation set is given).
struct CallbackConfig {
  int early_stop_patience = 5;
  float lr_reduce_factor = 0.5f;
  int lr_reduce_patience = 3;

  void validate() const;
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::RmsProp;
  float learning_rate = 1e-3f;
  float momentum = 0.9f;
  int batch_size = 64;
  int max_epochs = 50;
  std::optional<CallbackConfig> callbacks = CallbackConfig{};

  void validate() const;
  OptimizerConfig optimizer_config() const;

  static TrainConfig rmsprop_default();
  static TrainConfig sgd_default();
};

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& json);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;

  double monitored() const noexcept { return val_loss.value_or(train_loss); }
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
  bool restored_best = false;

  /// `epoch,lr,train_loss,train_acc,val_loss,val_acc`
  std::string to_csv() const;
};

/// Images of `corpus` selected by `members`.
struct ImageSet {
  std::span<const LabeledImage> corpus;
  std::span<const std::size_t> members;

  std::size_t size() const noexcept { return members.size(); }
};

struct BatchAugment {
  AugmentConfig config;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// Standardizes (and optionally augments) the selected images into an NHWC
/// batch.
Tensor make_batch(const ImageSet& images, std::span<const std::size_t> positions, const PreprocessProfile& profile,
                  const std::optional<BatchAugment>& augment = std::nullopt);

/// Mean categorical cross-entropy of softmax outputs (clipped at 1e-7) and
/// its gradient with respect to the logits.
double cross_entropy(const Tensor& probabilities, std::span<const int> labels, Tensor* grad_logits = nullptr);

struct Predictions {
  std::vector<int> labels;          // ground truth
  std::vector<int> predicted;       // argmax
  std::vector<float> positive;      // parasitized probability
  double loss = 0.0;
  double accuracy = 0.0;
};

Predictions evaluate(Network& network, const ImageSet& images, const PreprocessProfile& profile, int batch_size = 32);

struct FitOptions {
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochRecord&, Network&)> on_epoch_end;
};

/// Minibatch training with the configured optimizer and callbacks. Throws
/// TrainingDiverged on a non-finite loss.
TrainingHistory fit(Network& network, const ImageSet& train, const std::optional<ImageSet>& validation,
                    const PreprocessProfile& profile, const TrainConfig& config, std::uint64_t seed,
                    const FitOptions& options = {});

}  // namespace plasmodium::nn
