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

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "plasmodium/error.hpp"
#include "plasmodium/preprocess.hpp"
#include "properties.hpp"

namespace plasmodium {
namespace {

FloatImage random_float_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  FloatImage img(h, w);
  for (float& v : img.data) v = u(rng);
  return img;
}

// Resize as two dense interpolation matrices, rows then columns.
std::vector<double> interpolation_matrix(int in, int out) {
  std::vector<double> m(static_cast<std::size_t>(out) * in, 0.0);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    s = std::min(std::max(s, 0.0), in - 1.0);
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, in - 1);
    m[o * in + lo] += 1.0 - (s - lo);
    m[o * in + hi] += s - lo;
  }
  return m;
}

FloatImage separable_resize(const FloatImage& img, int oh, int ow) {
  const auto ry = interpolation_matrix(img.height, oh);
  const auto rx = interpolation_matrix(img.width, ow);
  FloatImage out(oh, ow, img.range);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < img.height; ++i)
          for (int j = 0; j < img.width; ++j) acc += ry[y * img.height + i] * rx[x * img.width + j] * img.at(i, j, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

TEST(Resize, MatchesSeparableInterpolationOracle) {
  std::mt19937_64 rng(7);
  for (auto [h, w, oh, ow] : std::vector<std::array<int, 4>>{{5, 7, 3, 4}, {4, 4, 9, 6}, {1, 6, 3, 3}, {13, 11, 13, 5}}) {
    const auto img = random_float_image(rng, h, w);
    const auto got = resize_bilinear(img, {oh, ow});
    const auto want = separable_resize(img, oh, ow);
    ASSERT_EQ(got.height, oh);
    ASSERT_EQ(got.width, ow);
    for (std::size_t i = 0; i < got.data.size(); ++i) EXPECT_NEAR(got.data[i], want.data[i], 1e-5) << i;
  }
}

TEST(Resize, HalvingAveragesTwoByTwoBlocks) {
  std::mt19937_64 rng(8);
  const auto img = random_float_image(rng, 8, 6);
  const auto out = resize_bilinear(img, {4, 3});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 3; ++c) {
        const float mean = (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) + img.at(2 * y + 1, 2 * x, c) +
                            img.at(2 * y + 1, 2 * x + 1, c)) / 4.0f;
        EXPECT_NEAR(out.at(y, x, c), mean, 1e-6);
      }
}

TEST(Resize, SameSizeIsIdentityAndZeroAreaThrows) {
  std::mt19937_64 rng(9);
  const auto img = random_float_image(rng, 5, 5);
  EXPECT_EQ(resize_bilinear(img, {5, 5}).data, img.data);
  EXPECT_THROW(resize_bilinear(FloatImage(0, 4), {2, 2}), DataError);
  EXPECT_THROW(standardize(Image(3, 0), PreprocessProfile::small()), DataError);
}

TEST(Standardize, ScalesBytesToUnitRangeAtTargetSize) {
  Image img(40, 50, 0);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 50; ++x) img.at(y, x, 0) = 255;
  const auto out = standardize(img, PreprocessProfile::small());
  EXPECT_EQ(out.height, 128);
  EXPECT_EQ(out.width, 128);
  EXPECT_EQ(out.range, PixelRange::Unit);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      EXPECT_FLOAT_EQ(out.at(y, x, 0), 1.0f);
      EXPECT_FLOAT_EQ(out.at(y, x, 1), 0.0f);
    }
}

TEST(Standardize, ConformingInputPassesThrough) {
  std::mt19937_64 rng(10);
  const auto img = random_float_image(rng, 32, 32);
  EXPECT_EQ(standardize(img, PreprocessProfile::svm_features()).data, img.data);
}

TEST(Standardize, ProfilesHaveTheirTargetSizes) {
  EXPECT_EQ(PreprocessProfile::svm_features().target_size, (TargetSize{32, 32}));
  EXPECT_EQ(PreprocessProfile::small().target_size, (TargetSize{128, 128}));
  EXPECT_EQ(PreprocessProfile::large().target_size, (TargetSize{224, 224}));
}

TEST(Augment, QuarterTurnRotatesCounterClockwise) {
  std::mt19937_64 rng(11);
  const int n = 7;
  const auto img = random_float_image(rng, n, n);
  AugmentDraw draw;
  draw.rotation_deg = 90.0;
  const auto out = apply_augmentation(img, draw);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(y, x, c), img.at(x, n - 1 - y, c), 1e-6);
}

TEST(Augment, IntegerShiftMovesContentAndClampsEdges) {
  std::mt19937_64 rng(12);
  const auto img = random_float_image(rng, 6, 8);
  AugmentDraw draw;
  draw.shift_x = 2.0;
  const auto out = apply_augmentation(img, draw);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(y, x, c), img.at(y, std::max(x - 2, 0), c), 1e-6);
}

TEST(Augment, FlipsMirrorTheImage) {
  std::mt19937_64 rng(13);
  const auto img = random_float_image(rng, 4, 5);
  AugmentDraw draw;
  draw.flip_horizontal = true;
  const auto h = apply_augmentation(img, draw);
  draw.flip_horizontal = false;
  draw.flip_vertical = true;
  const auto v = apply_augmentation(img, draw);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      EXPECT_EQ(h.at(y, x, 1), img.at(y, 4 - x, 1));
      EXPECT_EQ(v.at(y, x, 2), img.at(3 - y, x, 2));
    }
}

TEST(Augment, DrawsStayWithinConfiguredRanges) {
  AugmentConfig config;
  std::mt19937_64 rng(14);
  for (int i = 0; i < 2000; ++i) {
    const auto d = draw_augmentation(config, 100, 50, rng);
    EXPECT_LE(std::abs(d.rotation_deg), 20.0);
    EXPECT_LE(std::abs(d.shear_deg), 10.0);
    EXPECT_LE(std::abs(d.shift_x), 5.0);
    EXPECT_LE(std::abs(d.shift_y), 10.0);
  }
}

TEST(Augment, InvalidRangesAreRejected) {
  AugmentConfig config;
  config.rotation_range = 200.0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = {};
  config.shift_range = -0.1;
  EXPECT_THROW(config.validate(), ConfigError);
}

TEST(Augment, SampleStreamsAreIndependentAndReproducible) {
  auto a = sample_stream(1, 0), b = sample_stream(1, 0), c = sample_stream(1, 1), d = sample_stream(2, 0);
  const auto first = a();
  EXPECT_EQ(first, b());
  EXPECT_NE(first, c());
  EXPECT_NE(first, d());
}

TEST(Profile, JsonRoundTrip) {
  PreprocessProfile p = PreprocessProfile::large();
  p.augment = AugmentConfig{};
  p.augment->seed = 99;
  const auto back = profile_from_json(to_json(p));
  EXPECT_EQ(back.target_size, p.target_size);
  ASSERT_TRUE(back.augment);
  EXPECT_EQ(back.augment->seed, 99u);
  EXPECT_EQ(to_json(back), to_json(p));
  auto bgr = to_json(p);
  bgr["channel_order"] = "BGR";
  EXPECT_THROW(profile_from_json(bgr), ConfigError);
}

TEST(AugmentProperties, FlipInvolution) {
  const auto r = testing::flip_involution(31);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(AugmentProperties, ZeroRangeIsIdentity) {
  const auto r = testing::augment_identity(32);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(AugmentProperties, RangeShapeAndReproducibility) {
  const auto r = testing::augment_range_and_shape(33);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

}  // namespace
}  // namespace plasmodium
