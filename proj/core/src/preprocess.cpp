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

#include "plasmodium/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plasmodium/error.hpp"

namespace plasmodium {

void AugmentConfig::validate() const {
  if (!(rotation_range >= 0.0 && rotation_range <= 180.0))
    throw ConfigError("rotation_range must lie in [0, 180] degrees");
  if (!(shift_range >= 0.0 && shift_range <= 0.5)) throw ConfigError("shift_range must lie in [0, 0.5]");
  if (!(shear_range >= 0.0 && shear_range <= 45.0)) throw ConfigError("shear_range must lie in [0, 45] degrees");
}

void PreprocessProfile::validate() const {
  if (target_size.height < 1 || target_size.width < 1) throw ConfigError("target size must be at least 1x1");
  if (augment) augment->validate();
}

PreprocessProfile PreprocessProfile::svm_features() { return {{32, 32}, true, std::nullopt}; }
PreprocessProfile PreprocessProfile::small() { return {{128, 128}, true, std::nullopt}; }
PreprocessProfile PreprocessProfile::large() { return {{224, 224}, true, std::nullopt}; }

namespace {

// Bilinear sample at continuous pixel coordinates; coordinates outside the
// image are clamped to the nearest edge.
inline void sample_bilinear(const FloatImage& image, double y, double x, float* out) {
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const float fy = static_cast<float>(y - y0);
  const float fx = static_cast<float>(x - x0);
  for (int c = 0; c < FloatImage::kChannels; ++c) {
    const float p00 = image.at(y0, x0, c);
    const float p01 = image.at(y0, x1, c);
    const float p10 = image.at(y1, x0, c);
    const float p11 = image.at(y1, x1, c);
    const float top = p00 + fx * (p01 - p00);
    const float bottom = p10 + fx * (p11 - p10);
    out[c] = top + fy * (bottom - top);
  }
}

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

void require_area(int height, int width) {
  if (height < 1 || width < 1) throw DataError("image has zero area");
}

}  // namespace

FloatImage resize_bilinear(const FloatImage& image, TargetSize size) {
  require_area(image.height, image.width);
  if (size.height < 1 || size.width < 1) throw ConfigError("resize target must be at least 1x1");
  if (size.height == image.height && size.width == image.width) return image;

  FloatImage out(size.height, size.width, image.range);
  const double sy = static_cast<double>(image.height) / size.height;
  const double sx = static_cast<double>(image.width) / size.width;
  for (int y = 0; y < size.height; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < size.width; ++x) {
      sample_bilinear(image, src_y, (x + 0.5) * sx - 0.5, &out.data[out.index(y, x, 0)]);
    }
  }
  return out;
}

FloatImage standardize(const FloatImage& image, const PreprocessProfile& profile) {
  require_area(image.height, image.width);
  FloatImage out = resize_bilinear(image, profile.target_size);
  if (profile.normalize && out.range == PixelRange::Byte) {
    for (float& v : out.data) v = std::clamp(v / 255.0f, 0.0f, 1.0f);
    out.range = PixelRange::Unit;
  }
  return out;
}

FloatImage standardize(const Image& image, const PreprocessProfile& profile) {
  require_area(image.height, image.width);
  return standardize(to_float(image), profile);
}

FloatImage standardize(const LabeledImage& image, const PreprocessProfile& profile) {
  return standardize(image.pixels, profile);
}

AugmentDraw draw_augmentation(const AugmentConfig& config, int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  AugmentDraw draw;
  // Fixed draw order keeps streams aligned whatever the configuration.
  const bool h = coin(rng);
  const bool v = coin(rng);
  const double r = unit(rng);
  const double s = unit(rng);
  const double tx = unit(rng);
  const double ty = unit(rng);
  draw.flip_horizontal = config.horizontal_flip && h;
  draw.flip_vertical = config.vertical_flip && v;
  draw.rotation_deg = r * config.rotation_range;
  draw.shear_deg = s * config.shear_range;
  draw.shift_x = tx * config.shift_range * width;
  draw.shift_y = ty * config.shift_range * height;
  return draw;
}

FloatImage apply_augmentation(const FloatImage& image, const AugmentDraw& draw) {
  require_area(image.height, image.width);
  FloatImage out = image;
  const bool geometric =
      draw.rotation_deg != 0.0 || draw.shear_deg != 0.0 || draw.shift_x != 0.0 || draw.shift_y != 0.0;

  if (geometric) {
    // Forward transform: shear, rotate about the center, then shift.
    // Each output pixel pulls from the inverse-mapped source position.
    const double theta = draw.rotation_deg * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double tan_s = std::tan(draw.shear_deg * std::numbers::pi / 180.0);
    const double cx = (image.width - 1) / 2.0;
    const double cy = (image.height - 1) / 2.0;
    const float hi = image.range == PixelRange::Unit ? 1.0f : 255.0f;
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        const double rx = x - cx - draw.shift_x;
        const double ry = y - cy - draw.shift_y;
        const double ux = cos_t * rx - sin_t * ry;
        const double uy = sin_t * rx + cos_t * ry;
        const double sx = ux - tan_s * uy;
        float* px = &out.data[out.index(y, x, 0)];
        sample_bilinear(image, snap(uy + cy), snap(sx + cx), px);
        for (int c = 0; c < FloatImage::kChannels; ++c) px[c] = std::clamp(px[c], 0.0f, hi);
      }
    }
  }

  if (draw.flip_horizontal) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width / 2; ++x) {
        for (int c = 0; c < FloatImage::kChannels; ++c) std::swap(out.at(y, x, c), out.at(y, out.width - 1 - x, c));
      }
    }
  }
  if (draw.flip_vertical) {
    for (int y = 0; y < out.height / 2; ++y) {
      for (int x = 0; x < out.width; ++x) {
        for (int c = 0; c < FloatImage::kChannels; ++c) std::swap(out.at(y, x, c), out.at(out.height - 1 - y, x, c));
      }
    }
  }
  return out;
}

FloatImage augment(const FloatImage& image, const AugmentConfig& config, std::mt19937_64& rng) {
  config.validate();
  return apply_augmentation(image, draw_augmentation(config, image.height, image.width, rng));
}

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

nlohmann::ordered_json to_json(const PreprocessProfile& profile) {
  nlohmann::ordered_json json;
  json["target_size"] = {profile.target_size.height, profile.target_size.width};
  json["normalize"] = profile.normalize;
  json["channel_order"] = "RGB";
  json["value_range"] = profile.normalize ? nlohmann::ordered_json{0.0, 1.0} : nlohmann::ordered_json{0.0, 255.0};
  json["resize"] = "bilinear";
  if (profile.augment) {
    const auto& a = *profile.augment;
    json["augment"] = {{"horizontal_flip", a.horizontal_flip}, {"vertical_flip", a.vertical_flip},
                       {"rotation_range", a.rotation_range},   {"shear_range", a.shear_range},
                       {"shift_range", a.shift_range},         {"seed", a.seed}};
  }
  return json;
}

PreprocessProfile profile_from_json(const nlohmann::json& json) {
  PreprocessProfile profile;
  const auto& size = json.at("target_size");
  profile.target_size = {size.at(0).get<int>(), size.at(1).get<int>()};
  profile.normalize = json.value("normalize", true);
  if (json.contains("channel_order") && json.at("channel_order").get<std::string>() != "RGB") {
    throw ConfigError("unsupported channel order '" + json.at("channel_order").get<std::string>() + "'");
  }
  if (json.contains("augment")) {
    const auto& a = json.at("augment");
    AugmentConfig config;
    config.horizontal_flip = a.value("horizontal_flip", true);
    config.vertical_flip = a.value("vertical_flip", true);
    config.rotation_range = a.value("rotation_range", 20.0);
    config.shear_range = a.value("shear_range", 10.0);
    config.shift_range = a.value("shift_range", 0.1);
    config.seed = a.value("seed", std::uint64_t{0});
    profile.augment = config;
  }
  profile.validate();
  return profile;
}

}  // namespace plasmodium
