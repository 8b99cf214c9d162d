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

#include <string>
#include <string_view>
#include <unordered_map>

#include "plasmodium/nn/network.hpp"

namespace plasmodium::nn {

enum class OptimizerKind { RmsProp, Sgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::RmsProp;
  float learning_rate = 1e-3f;
  float momentum = 0.9f;  // SGD
  float rho = 0.9f;       // RMSprop
  float epsilon = 1e-7f;  // RMSprop
};

/// Keras-compatible update rules. Only non-statistic parameters of trainable
/// layers move.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void step(Network& network);

  float learning_rate() const noexcept { return config_.learning_rate; }
  void set_learning_rate(float lr) noexcept { config_.learning_rate = lr; }
  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_;
  std::unordered_map<std::string, Tensor> slots_;
};

}  // namespace plasmodium::nn
