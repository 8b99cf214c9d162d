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
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plasmodium/dataset.hpp"
#include "plasmodium/image.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/tensor.hpp"

namespace plasmodium::testing {

/// A pink elliptical cell on a black background; parasitized cells carry one
/// to three dark purple inclusions.
Image synthetic_cell(std::mt19937_64& rng, ClassLabel label, int height, int width);

/// `per_class` images of each class, sides drawn from [min_side, max_side].
/// Sorted by source path like an ingested corpus.
std::vector<LabeledImage> synthetic_corpus(std::size_t per_class, std::uint64_t seed, int min_side = 48,
                                           int max_side = 72);

/// Writes `<root>/<Class>/<name>.png` for every image.
void write_corpus(const std::filesystem::path& root, std::span<const LabeledImage> corpus);

/// Uniform [0, 1) tensor.
nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f);

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "plasmodium");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path fixture_path(const std::string& relative);
nlohmann::json read_json(const std::filesystem::path& path);

/// Topology and layer names of the Keras model behind keras/mini.h5.
nn::LayerGraph keras_mini_graph();

}  // namespace plasmodium::testing
