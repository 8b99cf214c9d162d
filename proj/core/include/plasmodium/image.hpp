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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace plasmodium {

/// 8-bit RGB image, row-major, channels interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  static constexpr int kChannels = 3;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0);

  bool empty() const noexcept { return height <= 0 || width <= 0; }
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }
  std::uint8_t& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[index(y, x, c)]; }
};

/// Value range a float image is expressed in.
enum class PixelRange { Byte, Unit };

/// Float RGB image (height x width x 3), same layout as Image.
struct FloatImage {
  int height = 0;
  int width = 0;
  PixelRange range = PixelRange::Unit;
  std::vector<float> data;

  static constexpr int kChannels = 3;

  FloatImage() = default;
  FloatImage(int h, int w, PixelRange r = PixelRange::Unit, float fill = 0.0f);

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }
  float& at(int y, int x, int c) { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data[index(y, x, c)]; }
};

FloatImage to_float(const Image& image);

}  // namespace plasmodium
