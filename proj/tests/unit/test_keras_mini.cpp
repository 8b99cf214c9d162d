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

#include <string>
#include <vector>

#include "plasmodium/keras_h5.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/nn/optimizer.hpp"
#include "plasmodium/nn/trainer.hpp"
#include "synthetic.hpp"

namespace plasmodium {
namespace {

using namespace nn;

class KerasMini : public ::testing::Test {
 protected:
  void SetUp() override {
    fx_ = testing::read_json(testing::fixture_path("keras/mini.json"));
    input_ = Tensor(fx_.at("input_shape").get<Shape>(), fx_.at("input").get<std::vector<float>>());
    labels_ = fx_.at("labels").get<std::vector<int>>();
  }

  Network loaded() {
    Network net(testing::keras_mini_graph(), 99);
    const auto report = load_keras_weights(net, testing::fixture_path("keras/mini.h5"));
    EXPECT_TRUE(report.matched_by_name);
    EXPECT_EQ(report.layers_loaded, 8u);
    return net;
  }

  static void expect_values(std::span<const float> got, const std::vector<float>& want, double tol,
                            const std::string& what) {
    ASSERT_EQ(got.size(), want.size()) << what;
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], tol) << what << "[" << i << "]";
  }

  void expect_weights(Network& net, const nlohmann::json& weights, double tol) {
    std::size_t seen = 0;
    for (const auto& [name, values] : weights.items()) {
      const auto* p = net.find_parameter(name);
      ASSERT_NE(p, nullptr) << name;
      expect_values(p->value.values(), values.get<std::vector<float>>(), tol, name);
      ++seen;
    }
    EXPECT_EQ(seen, net.parameters().size());
  }

  void train(Network& net, Optimizer& opt, int steps) {
    for (int s = 0; s < steps; ++s) {
      net.zero_grad();
      Tensor g;
      cross_entropy(net.forward(input_, Mode::Training), labels_, &g);
      net.backward(g, true);
      opt.step(net);
    }
  }

  nlohmann::json fx_;
  Tensor input_;
  std::vector<int> labels_;
};

TEST_F(KerasMini, InferenceOutputMatches) {
  auto net = loaded();
  expect_values(net.forward(input_, Mode::Inference).values(), fx_.at("inference_output").get<std::vector<float>>(),
                1e-5, "inference");
}

TEST_F(KerasMini, TrainingOutputMatches) {
  auto net = loaded();
  expect_values(net.forward(input_, Mode::Training).values(), fx_.at("training_output").get<std::vector<float>>(),
                1e-5, "training");
}

TEST_F(KerasMini, LossAndGradientsMatch) {
  auto net = loaded();
  net.zero_grad();
  Tensor g;
  const double loss = cross_entropy(net.forward(input_, Mode::Training), labels_, &g);
  EXPECT_NEAR(loss, fx_.at("loss").get<double>(), 1e-5);
  net.backward(g, true);
  std::size_t seen = 0;
  for (const auto& [name, values] : fx_.at("gradients").items()) {
    const auto* p = net.find_parameter(name);
    ASSERT_NE(p, nullptr) << name;
    expect_values(p->grad.values(), values.get<std::vector<float>>(), 1e-5, name);
    ++seen;
  }
  std::size_t trainable = 0;
  for (const auto* p : net.parameters()) trainable += !p->statistic;
  EXPECT_EQ(seen, trainable);
}

TEST_F(KerasMini, SgdMomentumStepsMatch) {
  auto net = loaded();
  const auto& cfg = fx_.at("sgd");
  Optimizer opt({.kind = OptimizerKind::Sgd, .learning_rate = cfg.at("learning_rate"), .momentum = cfg.at("momentum")});
  train(net, opt, cfg.at("steps"));
  expect_weights(net, cfg.at("weights"), 2e-5);
}

TEST_F(KerasMini, RmsPropStepsMatch) {
  auto net = loaded();
  const auto& cfg = fx_.at("rmsprop");
  Optimizer opt({.kind = OptimizerKind::RmsProp,
                 .learning_rate = cfg.at("learning_rate"),
                 .rho = cfg.at("rho"),
                 .epsilon = cfg.at("epsilon")});
  train(net, opt, cfg.at("steps"));
  expect_weights(net, cfg.at("weights"), 2e-5);
}

TEST_F(KerasMini, FrozenLayersDoNotMove) {
  auto net = loaded();
  const int conv_a = net.graph().find("conv_a");
  net.set_trainable(conv_a, false);
  const auto before = net.checksum(conv_a, conv_a + 1);
  Optimizer opt({.kind = OptimizerKind::Sgd, .learning_rate = 0.1f});
  train(net, opt, 2);
  EXPECT_EQ(net.checksum(conv_a, conv_a + 1), before);
}

TEST_F(KerasMini, H5RoundTripPreservesEveryWeight) {
  auto net = loaded();
  testing::TempDir dir;
  write_keras_h5(net, dir / "copy.h5");
  const auto file = read_keras_h5(dir / "copy.h5");
  const auto original = read_keras_h5(testing::fixture_path("keras/mini.h5"));
  ASSERT_EQ(file.size(), original.size());
  Network other(testing::keras_mini_graph(), 5);
  load_keras_weights(other, dir / "copy.h5");
  EXPECT_EQ(other.checksum(), net.checksum());
}

}  // namespace
}  // namespace plasmodium
