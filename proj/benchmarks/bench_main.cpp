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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "plasmodium/metrics.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/preprocess.hpp"
#include "plasmodium/svm.hpp"

namespace {

using namespace plasmodium;

nn::Tensor random_batch(const nn::Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  nn::Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// One 3x3 convolution of `channels` -> `filters` at `side`x`side`.
nn::Network conv_net(int side, int channels, int filters) {
  nn::GraphBuilder b("bench", {side, side, channels});
  int x = b.conv(b.input(), filters, {3, 3}, {1, 1}, nn::Padding::Same, nn::Activation::Relu);
  x = b.global_avg_pool(x);
  b.dense(x, 2, nn::Activation::Softmax);
  return nn::Network(std::move(b).build(), 1);
}

void BM_ConvForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  auto net = conv_net(side, 32, 32);
  const auto batch = random_batch({8, side, side, 32}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch, nn::Mode::Inference).values().data());
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ConvForwardBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  auto net = conv_net(side, 32, 32);
  const auto batch = random_batch({8, side, side, 32}, 3);
  const auto grad = random_batch({8, 2}, 4);
  for (auto _ : state) {
    net.zero_grad();
    net.forward(batch, nn::Mode::Training);
    net.backward(grad);
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureMatrix m;
  std::vector<float> row(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const int label = static_cast<int>(i % 2);
    for (auto& v : row) v = n(rng) + (label ? 0.3f : -0.3f);
    m.append(row, label);
  }
  return m;
}

void BM_SvmTrain(benchmark::State& state) {
  const auto data = random_features(static_cast<std::size_t>(state.range(0)), 3072, 5);
  for (auto _ : state) benchmark::DoNotOptimize(train_svm(data, {1.0, 1.0 / 3072}).rho);
}
BENCHMARK(BM_SvmTrain)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_SvmDecision(benchmark::State& state) {
  const auto train = random_features(800, 3072, 6);
  const auto model = train_svm(train, {1.0, 1.0 / 3072});
  const auto probe = random_features(static_cast<std::size_t>(state.range(0)), 3072, 7);
  for (auto _ : state) benchmark::DoNotOptimize(decision_scores(model, probe).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SvmDecision)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_AucRoc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> labels(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    scores[i] = u(rng) + 0.2 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc_roc(labels, scores));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AucRoc)->Arg(1 << 12)->Arg(1 << 16);

void BM_ResizeBilinear(benchmark::State& state) {
  FloatImage image(142, 148);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : image.data) v = u(rng);
  const int side = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(image, {side, side}).data.data());
}
BENCHMARK(BM_ResizeBilinear)->Arg(128)->Arg(224);

}  // namespace

BENCHMARK_MAIN();
