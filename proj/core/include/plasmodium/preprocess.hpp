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
#include <optional>
#include <random>

#include <nlohmann/json.hpp>

#include "plasmodium/dataset.hpp"
#include "plasmodium/image.hpp"

namespace plasmodium {

struct TargetSize {
  int height = 0;
  int width = 0;

  friend bool operator==(const TargetSize&, const TargetSize&) = default;
};

/// Geometric training-time augmentation ranges. Angles are in degrees,
/// shift is a fraction of the image dimension.
struct AugmentConfig {
  bool horizontal_flip = true;
  bool vertical_flip = true;
  double rotation_range = 20.0;
  double shear_range = 10.0;
  double shift_range = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a range is outside its allowed interval.
  void validate() const;
};

struct PreprocessProfile {
  TargetSize target_size{128, 128};
  bool normalize = true;
  std::optional<AugmentConfig> augment;

  void validate() const;

  /// 32x32 unit-range profile used for SVM features.
  static PreprocessProfile svm_features();
  /// 128x128 profile shared by CNN-A and the transfer backbones.
  static PreprocessProfile small();
  /// 224x224 profile used by CNN-B.
  static PreprocessProfile large();
};

/// One concrete draw of augmentation parameters.
struct AugmentDraw {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  double rotation_deg = 0.0;  // counter-clockwise as displayed
  double shear_deg = 0.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;  // pixels
};

/// Bilinear resize with half-pixel centers and edge clamping.
FloatImage resize_bilinear(const FloatImage& image, TargetSize size);

/// Converts to the profile's size and value range. Already-conforming inputs
/// pass through unchanged. Throws DataError for zero-area images.
FloatImage standardize(const FloatImage& image, const PreprocessProfile& profile);
FloatImage standardize(const Image& image, const PreprocessProfile& profile);
FloatImage standardize(const LabeledImage& image, const PreprocessProfile& profile);

AugmentDraw draw_augmentation(const AugmentConfig& config, int height, int width, std::mt19937_64& rng);

/// Applies a concrete draw: affine resampling (bilinear, nearest-edge fill)
/// followed by flips. Output values are clamped to the input range.
FloatImage apply_augmentation(const FloatImage& image, const AugmentDraw& draw);

FloatImage augment(const FloatImage& image, const AugmentConfig& config, std::mt19937_64& rng);

/// Independent random stream for sample `index` of a run seeded with `seed`.
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index);

nlohmann::ordered_json to_json(const PreprocessProfile& profile);
PreprocessProfile profile_from_json(const nlohmann::json& json);

}  // namespace plasmodium
