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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "plasmodium/image.hpp"

namespace plasmodium {

/// Global class index mapping. Row order of every confusion matrix and
/// report follows this enum.
enum class ClassLabel : std::uint8_t { Uninfected = 0, Parasitized = 1 };

inline constexpr std::array<std::string_view, 2> kClassNames{"uninfected", "parasitized"};
inline constexpr std::array<std::string_view, 2> kClassDirectories{"Uninfected", "Parasitized"};
inline constexpr std::string_view kCorpusCitationUrl = "https://lhncbc.nlm.nih.gov/publication/pub9932";

constexpr int class_index(ClassLabel label) noexcept { return static_cast<int>(label); }
constexpr std::string_view class_name(ClassLabel label) noexcept { return kClassNames[class_index(label)]; }

struct LabeledImage {
  Image pixels;
  ClassLabel label = ClassLabel::Uninfected;
  /// Path relative to the corpus root, e.g. "Parasitized/C33P1_cell_12.png".
  std::string source_path;
};

struct IngestSummary {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::array<std::size_t, 2> per_class{0, 0};
  std::vector<std::string> warnings;
};

struct Corpus {
  std::vector<LabeledImage> images;
  IngestSummary summary;
};

/// Reads `<root>/Uninfected/*.png` and `<root>/Parasitized/*.png` (directory
/// names matched case-insensitively). The result is sorted by source_path.
/// When `limit_per_class` is set, the first N files per class in lexicographic
/// order are kept. Undecodable files are skipped and counted. A missing class
/// directory throws ConfigError.
Corpus ingest_corpus(const std::filesystem::path& root,
                     std::optional<std::size_t> limit_per_class = std::nullopt,
                     unsigned workers = 0);

enum class SplitScheme { Svm, Cnn, Transfer };

std::string_view to_string(SplitScheme scheme) noexcept;
SplitScheme parse_split_scheme(std::string_view text);

/// Disjoint train/validation/test partitions. Members are indices into the
/// corpus the split was built from.
struct DatasetSplit {
  SplitScheme scheme = SplitScheme::Svm;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return train.size() + validation.size() + test.size(); }
};

/// Partition sizes a scheme assigns to a corpus of `total` images.
/// Transfer sizes are per class.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  bool per_class = false;
  bool fractional_fallback = false;
};

SplitSizes split_sizes(SplitScheme scheme, std::size_t total, std::size_t smallest_class);

DatasetSplit make_split(std::span<const LabeledImage> corpus, SplitScheme scheme, std::uint64_t seed);

/// Deterministic class-balanced subsample of `total` images (total/2 per
/// class). Returned indices are sorted.
std::vector<std::size_t> balanced_subset(std::span<const LabeledImage> corpus, std::size_t total,
                                         std::uint64_t seed);

std::array<std::size_t, 2> class_counts(std::span<const LabeledImage> corpus,
                                        std::span<const std::size_t> members);

/// `{scheme, seed, train: [paths], validation: [paths], test: [paths]}`
nlohmann::ordered_json split_to_json(const DatasetSplit& split, std::span<const LabeledImage> corpus);

/// Resolves manifest paths against `corpus`. Throws DataError for paths the
/// corpus does not contain.
DatasetSplit split_from_json(const nlohmann::json& manifest, std::span<const LabeledImage> corpus);

}  // namespace plasmodium
