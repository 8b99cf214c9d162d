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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plasmodium/dataset.hpp"
#include "plasmodium/metrics.hpp"
#include "plasmodium/nn/graph.hpp"
#include "plasmodium/nn/network.hpp"
#include "plasmodium/preprocess.hpp"

namespace plasmodium {

inline constexpr std::size_t kProbeSize = 32;
inline constexpr double kFidelityTolerance = 1e-4;
inline constexpr std::size_t kShardBytes = std::size_t{4} << 20;
inline constexpr std::string_view kModelFile = "model.json";

struct BundleMetadata {
  std::string model_name;
  std::string manifest_hash;  // hash of the training run manifest
  std::optional<EvaluationReport> metrics;
};

struct FidelityCheck {
  std::size_t probe_size = 0;
  double max_abs_diff = 0.0;
  double tolerance = kFidelityTolerance;

  bool passed() const noexcept { return max_abs_diff < tolerance; }
};

/// A TF.js layers-format bundle on disk: `model.json` (Keras functional
/// topology, weights manifest, user metadata) plus `group1-shard*of*.bin`.
struct ExportBundle {
  std::filesystem::path directory;
  PreprocessProfile preprocess;
  std::array<std::string, 2> labels{std::string(kClassNames[0]), std::string(kClassNames[1])};
  BundleMetadata metadata;
  std::optional<FidelityCheck> fidelity;
  std::vector<std::string> shards;
};

/// Keras functional-model config of `graph` (`class_name: Functional`).
/// Throws ExportError naming the first layer that cannot be expressed.
nlohmann::ordered_json model_topology(const nn::LayerGraph& graph);

/// Inverse of model_topology for the layer types it writes.
nn::LayerGraph graph_from_topology(const nlohmann::json& topology);

/// Writes model.json and the weight shards without a fidelity check.
ExportBundle write_bundle(const nn::Network& network, const PreprocessProfile& profile,
                          const BundleMetadata& metadata, const std::filesystem::path& out_dir);

struct LoadedBundle {
  nn::Network network;
  ExportBundle bundle;
};

LoadedBundle load_bundle(const std::filesystem::path& dir);

/// The first min(32, |members|) images of `members`, standardized with
/// `profile`, as one NHWC batch.
nn::Tensor probe_batch(std::span<const LabeledImage> corpus, std::span<const std::size_t> members,
                       const PreprocessProfile& profile);

/// Max |p_native - p_bundle| over the probe batch.
double max_probability_difference(nn::Network& native, nn::Network& reloaded, const nn::Tensor& probe);

/// Writes the bundle, reloads it from disk and compares class probabilities
/// on `probe`. The result is recorded in model.json; a difference at or above
/// the tolerance throws ExportError.
ExportBundle export_model(nn::Network& network, const PreprocessProfile& profile, const BundleMetadata& metadata,
                          const nn::Tensor& probe, const std::filesystem::path& out_dir);

/// One entry of the web app's `models/catalog.json`.
struct CatalogEntry {
  std::string id;
  std::string display_name;
  std::string bundle_url;  // relative to the catalog, ending in model.json
  std::optional<double> accuracy;
  std::optional<double> precision;  // weighted averages
  std::optional<double> recall;
  std::optional<double> f1;
  PreprocessProfile preprocess;
};

CatalogEntry catalog_entry(const ExportBundle& bundle, std::string id, std::string display_name,
                           std::string bundle_url);
nlohmann::ordered_json to_json(const CatalogEntry& entry);
CatalogEntry catalog_entry_from_json(const nlohmann::json& json);

/// Inserts or replaces (by id) an entry in the catalog file, creating it if
/// needed. Entries are kept sorted by id.
void upsert_catalog(const std::filesystem::path& catalog, const CatalogEntry& entry);
std::vector<CatalogEntry> read_catalog(const std::filesystem::path& catalog);

}  // namespace plasmodium
