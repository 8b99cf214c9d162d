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

#include "synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "plasmodium/png_io.hpp"

#ifndef PLASMODIUM_FIXTURE_DIR
#error "PLASMODIUM_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace plasmodium::testing {

namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

Image synthetic_cell(std::mt19937_64& rng, ClassLabel label, int height, int width) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 6.0);
  Image image(height, width, 0);
  const double cy = (height - 1) / 2.0 + (u(rng) - 0.5) * 0.1 * height;
  const double cx = (width - 1) / 2.0 + (u(rng) - 0.5) * 0.1 * width;
  const double ry = (0.36 + 0.08 * u(rng)) * height;
  const double rx = (0.36 + 0.08 * u(rng)) * width;
  const double base[3] = {205 + 20 * (u(rng) - 0.5), 140 + 20 * (u(rng) - 0.5), 165 + 20 * (u(rng) - 0.5)};

  struct Spot {
    double y, x, r;
  };
  std::vector<Spot> spots;
  if (label == ClassLabel::Parasitized) {
    const int count = 1 + static_cast<int>(u(rng) * 3.0);
    for (int k = 0; k < count; ++k) {
      const double a = u(rng) * 2.0 * M_PI, d = 0.6 * u(rng);
      spots.push_back({cy + d * ry * std::sin(a), cx + d * rx * std::cos(a), (0.06 + 0.05 * u(rng)) * std::min(height, width)});
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double e = std::pow((y - cy) / ry, 2) + std::pow((x - cx) / rx, 2);
      if (e > 1.0) continue;
      double px[3] = {base[0] - 25 * e, base[1] - 15 * e, base[2] - 15 * e};
      for (const auto& s : spots) {
        if (std::hypot(y - s.y, x - s.x) <= s.r) {
          px[0] = 95;
          px[1] = 40;
          px[2] = 125;
        }
      }
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = clamp_byte(px[c] + noise(rng));
    }
  }
  return image;
}

std::vector<LabeledImage> synthetic_corpus(std::size_t per_class, std::uint64_t seed, int min_side, int max_side) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> side(min_side, max_side);
  std::vector<LabeledImage> corpus;
  for (ClassLabel label : {ClassLabel::Parasitized, ClassLabel::Uninfected}) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const int h = side(rng), w = side(rng);
      corpus.push_back({synthetic_cell(rng, label, h, w), label,
                        fmt::format("{}/cell_{:05d}.png", kClassDirectories[class_index(label)], i)});
    }
  }
  std::sort(corpus.begin(), corpus.end(), [](const auto& a, const auto& b) { return a.source_path < b.source_path; });
  return corpus;
}

void write_corpus(const std::filesystem::path& root, std::span<const LabeledImage> corpus) {
  for (const char* dir : {"Parasitized", "Uninfected"}) std::filesystem::create_directories(root / dir);
  for (const auto& image : corpus) write_png(root / image.source_path, image.pixels);
}

nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  nn::Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / fmt::format("{}-{:x}-{}", tag, rd(), counter++);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path fixture_path(const std::string& relative) {
  return std::filesystem::path(PLASMODIUM_FIXTURE_DIR) / relative;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path.string());
  return nlohmann::json::parse(in);
}

// Same topology and names as the Keras model behind mini.h5 / mini.json.
nn::LayerGraph keras_mini_graph() {
  nn::GraphBuilder b("mini", {9, 9, 3});
  const int a = b.conv(b.input(), 4, {3, 3}, {2, 2}, nn::Padding::Same, nn::Activation::Relu, true, "conv_a");
  const int s = b.separable_conv(a, 4, {3, 3}, nn::Padding::Same, false, "sep_b");
  const int bn = b.batch_norm(s, false, "bn_b");
  const int act = b.activation(bn, nn::Activation::Relu, "act_b");
  const int c = b.conv(a, 4, {1, 1}, {1, 1}, nn::Padding::Valid, nn::Activation::Linear, false, "conv_c");
  const int d = b.add({act, c}, "add_d");
  const int e = b.max_pool(d, {3, 3}, {2, 2}, nn::Padding::Same, "max_e");
  const int f = b.avg_pool(d, {3, 3}, {2, 2}, nn::Padding::Same, "avg_f");
  const int g = b.concat({e, f}, "cat_g");
  const int h = b.zero_pad(g, {1, 0, 0, 1}, "pad_h");
  const int i = b.batch_norm(b.conv(h, 6, {2, 2}, {1, 1}, nn::Padding::Valid, nn::Activation::Linear, true, "conv_i"), true, "bn_i");
  const int l = b.concat({b.global_avg_pool(i, "gap_j"), b.flatten(i, "flat_k")}, "cat_l");
  b.dense(b.dense(l, 5, nn::Activation::Relu, "dense_m"), 2, nn::Activation::Softmax, "dense_out");
  return std::move(b).build();
}

}  // namespace plasmodium::testing
