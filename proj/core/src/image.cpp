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

#include "plasmodium/image.hpp"

namespace plasmodium {

Image::Image(int h, int w, std::uint8_t fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * kChannels, fill) {}

FloatImage::FloatImage(int h, int w, PixelRange r, float fill)
    : height(h), width(w), range(r), data(static_cast<std::size_t>(h) * w * kChannels, fill) {}

FloatImage to_float(const Image& image) {
  FloatImage out(image.height, image.width, PixelRange::Byte);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out.data[i] = image.pixels[i];
  return out;
}

}  // namespace plasmodium
