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

#include "plasmodium/nn/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "plasmodium/error.hpp"

namespace plasmodium::nn {

namespace {

constexpr double kProbabilityClip = 1e-7;

int label_of(const ImageSet& images, std::size_t position) {
  return class_index(images.corpus[images.members[position]].label);
}

std::string optional_cell(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

}  // namespace

void CallbackConfig::validate() const {
  if (early_stop_patience < 1 || lr_reduce_patience < 1) throw ConfigError("callback patience must be >= 1");
  if (!(lr_reduce_factor > 0.0f && lr_reduce_factor < 1.0f)) throw ConfigError("lr_reduce_factor must lie in (0, 1)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0f)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (callbacks) callbacks->validate();
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig c;
  c.kind = optimizer;
  c.learning_rate = learning_rate;
  c.momentum = momentum;
  return c;
}

TrainConfig TrainConfig::rmsprop_default() { return TrainConfig{}; }

TrainConfig TrainConfig::sgd_default() {
  TrainConfig c;
  c.optimizer = OptimizerKind::Sgd;
  c.learning_rate = 1e-2f;
  return c;
}

nlohmann::ordered_json to_json(const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["optimizer"] = to_string(config.optimizer);
  j["learning_rate"] = config.learning_rate;
  if (config.optimizer == OptimizerKind::Sgd) j["momentum"] = config.momentum;
  j["loss"] = "categorical_crossentropy";
  j["batch_size"] = config.batch_size;
  j["max_epochs"] = config.max_epochs;
  if (config.callbacks) {
    j["callbacks"] = {{"monitor", "val_loss"},
                      {"early_stop_patience", config.callbacks->early_stop_patience},
                      {"checkpoint_on", "val_loss"},
                      {"lr_reduce_factor", config.callbacks->lr_reduce_factor},
                      {"lr_reduce_patience", config.callbacks->lr_reduce_patience}};
  } else {
    j["callbacks"] = nullptr;
  }
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<float>();
  c.momentum = j.value("momentum", 0.9f);
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  const auto& cb = j.at("callbacks");
  if (cb.is_null()) {
    c.callbacks.reset();
  } else {
    c.callbacks = CallbackConfig{cb.at("early_stop_patience").get<int>(), cb.at("lr_reduce_factor").get<float>(),
                                 cb.at("lr_reduce_patience").get<int>()};
  }
  c.validate();
  return c;
}

std::string TrainingHistory::to_csv() const {
  std::string out = "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : epochs) {
    out += fmt::format("{},{:.8g},{:.6f},{:.6f},{},{}\n", e.epoch, e.learning_rate, e.train_loss, e.train_accuracy,
                       optional_cell(e.val_loss), optional_cell(e.val_accuracy));
  }
  return out;
}

Tensor make_batch(const ImageSet& images, std::span<const std::size_t> positions, const PreprocessProfile& profile,
                  const std::optional<BatchAugment>& augment) {
  const int h = profile.target_size.height, w = profile.target_size.width;
  Tensor batch({static_cast<int>(positions.size()), h, w, 3});
  const std::size_t stride = static_cast<std::size_t>(h) * w * 3;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const std::size_t member = images.members[positions[k]];
    FloatImage img = standardize(images.corpus[member], profile);
    if (augment) {
      auto rng = sample_stream(augment->seed ^ (augment->epoch * 0x9e3779b97f4a7c15ULL), member);
      img = plasmodium::augment(img, augment->config, rng);
    }
    std::copy(img.data.begin(), img.data.end(), batch.data() + k * stride);
  }
  return batch;
}

double cross_entropy(const Tensor& probabilities, std::span<const int> labels, Tensor* grad_logits) {
  const std::size_t n = labels.size();
  if (probabilities.rank() != 2 || static_cast<std::size_t>(probabilities.dim(0)) != n) {
    throw ShapeError("cross_entropy: probabilities " + to_string(probabilities.shape()) + " vs " +
                     std::to_string(n) + " labels");
  }
  const std::size_t k = probabilities.dim(1);
  if (grad_logits) grad_logits->reset(probabilities.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::invalid_argument("cross_entropy: label out of range");
    const double p = std::clamp<double>(probabilities[i * k + y], kProbabilityClip, 1.0 - kProbabilityClip);
    total -= std::log(p);
    if (grad_logits) {
      for (std::size_t c = 0; c < k; ++c) {
        (*grad_logits)[i * k + c] =
            (probabilities[i * k + c] - (static_cast<int>(c) == y ? 1.0f : 0.0f)) / static_cast<float>(n);
      }
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

Predictions evaluate(Network& network, const ImageSet& images, const PreprocessProfile& profile, int batch_size) {
  Predictions out;
  const std::size_t n = images.size(), step = std::max(batch_size, 1);
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> positions;
  for (std::size_t b0 = 0; b0 < n; b0 += step) {
    const std::size_t b1 = std::min(n, b0 + step);
    positions.resize(b1 - b0);
    std::iota(positions.begin(), positions.end(), b0);
    const Tensor batch = make_batch(images, positions, profile);
    const Tensor probs = network.predict(batch, static_cast<int>(step));
    const std::size_t k = probs.dim(1);
    std::vector<int> labels;
    for (std::size_t p : positions) labels.push_back(label_of(images, p));
    loss += cross_entropy(probs, labels) * static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const float* row = probs.data() + i * k;
      const int pred = static_cast<int>(std::max_element(row, row + k) - row);
      out.labels.push_back(labels[i]);
      out.predicted.push_back(pred);
      out.positive.push_back(row[k - 1]);
      correct += pred == labels[i];
    }
  }
  if (n) {
    out.loss = loss / static_cast<double>(n);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return out;
}

TrainingHistory fit(Network& network, const ImageSet& train, const std::optional<ImageSet>& validation,
                    const PreprocessProfile& profile, const TrainConfig& config, std::uint64_t seed,
                    const FitOptions& options) {
  config.validate();
  if (train.size() == 0) throw ConfigError("training set is empty");
  const Shape expected{profile.target_size.height, profile.target_size.width, 3};
  if (network.input_shape() != expected) {
    throw ConfigError("profile size " + to_string(expected) + " does not match network input " +
                      to_string(network.input_shape()));
  }
  const bool has_validation = validation && validation->size() > 0;
  Optimizer optimizer(config.optimizer_config());
  network.reseed(seed);

  TrainingHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights;
  int wait_stop = 0, wait_lr = 0;

  std::vector<std::size_t> order(train.size());
  std::vector<int> labels;
  Tensor grad;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq epoch_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                            static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 shuffle_rng(epoch_seq);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::optional<BatchAugment> aug;
    if (profile.augment) aug = BatchAugment{*profile.augment, profile.augment->seed ^ seed, static_cast<std::uint64_t>(epoch)};

    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = optimizer.learning_rate();
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t bs = config.batch_size;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      const std::span<const std::size_t> positions(order.data() + b0, std::min(order.size(), b0 + bs) - b0);
      const Tensor batch = make_batch(train, positions, profile, aug);
      labels.clear();
      for (std::size_t p : positions) labels.push_back(label_of(train, p));
      const Tensor& probs = network.forward(batch, Mode::Training);
      const double loss = cross_entropy(probs, labels, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged(fmt::format("non-finite loss at epoch {} batch {} (lr {})", epoch, b0 / bs,
                                           optimizer.learning_rate()));
      }
      const std::size_t k = probs.dim(1);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const float* row = probs.data() + i * k;
        correct += static_cast<int>(std::max_element(row, row + k) - row) == labels[i];
      }
      loss_sum += loss * static_cast<double>(labels.size());
      network.zero_grad();
      network.backward(grad);
      optimizer.step(network);
    }
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!std::isfinite(record.train_loss)) throw TrainingDiverged(fmt::format("non-finite loss at epoch {}", epoch));
    if (has_validation) {
      const auto v = evaluate(network, *validation, profile, config.batch_size);
      record.val_loss = v.loss;
      record.val_accuracy = v.accuracy;
    }
    history.epochs.push_back(record);

    bool stop = false;
    const double monitored = record.monitored();
    if (monitored < best) {
      best = monitored;
      history.best_epoch = epoch;
      if (config.callbacks) best_weights = network.snapshot();
      wait_stop = wait_lr = 0;
    } else if (config.callbacks) {
      ++wait_stop;
      ++wait_lr;
      if (wait_lr >= config.callbacks->lr_reduce_patience) {
        optimizer.set_learning_rate(optimizer.learning_rate() * config.callbacks->lr_reduce_factor);
        wait_lr = 0;
      }
      if (wait_stop >= config.callbacks->early_stop_patience) {
        history.early_stopped = true;
        stop = true;
      }
    }
    if (options.on_epoch_end && !options.on_epoch_end(record, network)) stop = true;
    if (stop) break;
  }
  if (config.callbacks && !best_weights.empty() && history.best_epoch != static_cast<int>(history.epochs.size())) {
    network.restore(best_weights);
    history.restored_best = true;
  }
  return history;
}

}  // namespace plasmodium::nn
