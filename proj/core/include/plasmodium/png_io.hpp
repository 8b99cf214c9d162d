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

#include <filesystem>

#include "plasmodium/image.hpp"

namespace plasmodium {

/// Decodes a PNG file into 8-bit RGB. Grayscale and alpha inputs are
/// converted. Throws DataError when the file cannot be decoded.
Image read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace plasmodium
