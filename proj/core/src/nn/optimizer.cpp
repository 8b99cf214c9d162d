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

#include "plasmodium/nn/optimizer.hpp"

#include <cmath>

#include "plasmodium/error.hpp"

namespace plasmodium::nn {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "rmsprop"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "rmsprop") return OptimizerKind::RmsProp;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0f)) throw ConfigError("learning rate must be positive");
  if (config_.momentum < 0.0f || config_.momentum >= 1.0f) throw ConfigError("momentum must lie in [0, 1)");
}

void Optimizer::step(Network& network) {
  const float lr = config_.learning_rate;
  for (Parameter* p : network.parameters()) {
    if (p->statistic || !network.is_trainable(p->layer)) continue;
    auto [it, fresh] = slots_.try_emplace(p->name);
    if (fresh || it->second.size() != p->value.size()) it->second = Tensor(p->value.shape());
    float* w = p->value.data();
    const float* g = p->grad.data();
    float* s = it->second.data();
    const std::size_t n = p->value.size();
    if (config_.kind == OptimizerKind::RmsProp) {
      const float rho = config_.rho, eps = config_.epsilon;
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = rho * s[i] + (1.0f - rho) * g[i] * g[i];
        w[i] -= lr * g[i] / std::sqrt(s[i] + eps);
      }
    } else {
      const float mom = config_.momentum;
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = mom * s[i] - lr * g[i];
        w[i] += s[i];
      }
    }
  }
}

}  // namespace plasmodium::nn
