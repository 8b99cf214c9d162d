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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "plasmodium/cnn_models.hpp"
#include "plasmodium/dataset.hpp"
#include "plasmodium/metrics.hpp"
#include "plasmodium/nn/trainer.hpp"
#include "plasmodium/preprocess.hpp"
#include "plasmodium/svm.hpp"
#include "plasmodium/transfer.hpp"

namespace plasmodium {

enum class ModelFamily { Svm, Cnn, Transfer };

/// One cell of the model x training-mode comparison grid.
struct ModelKey {
  ModelFamily family = ModelFamily::Svm;
  CnnArch arch = CnnArch::A;
  Backbone backbone = Backbone::Vgg19;
  Regime regime = Regime::FrozenHeadOnly;

  /// `svm`, `cnn-a`, `cnn-b`, `<backbone>-<regime>`
  std::string id() const;
  std::string_view method() const noexcept;  // Machine/Deep/Transfer Learning
  std::string_view model_name() const noexcept;
  std::string_view training_mode() const noexcept;
  /// Row of the comparison table, 0-11.
  int grid_position() const noexcept;
  SplitScheme split_scheme() const noexcept;
  PreprocessProfile profile() const;

  friend bool operator==(const ModelKey& a, const ModelKey& b) { return a.id() == b.id(); }
};

ModelKey parse_model_id(std::string_view id);

/// The twelve cells in table order.
std::vector<ModelKey> model_matrix();

/// Everything needed to reproduce and audit one run. Contains no timestamps
/// or absolute paths, so equal inputs give byte-identical files.
struct RunManifest {
  std::string run_id;
  ModelKey model;
  std::uint64_t seed = 0;
  SplitScheme scheme = SplitScheme::Svm;
  std::string split_hash;
  std::size_t corpus_size = 0;
  std::optional<std::size_t> subset;  // balanced subsample size, when used
  PreprocessProfile profile;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::optional<EvaluationReport> metrics;
  std::vector<std::string> warnings;

  /// FNV-1a of the manifest JSON without its own hash field.
  std::string hash() const;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& json);

std::string split_hash(const DatasetSplit& split, std::span<const LabeledImage> corpus);

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kHistoryFile = "history.csv";
inline constexpr std::string_view kReportJsonFile = "report.json";
inline constexpr std::string_view kReportTextFile = "report.txt";
inline constexpr std::string_view kSplitFile = "split.json";
inline constexpr std::string_view kBundleDir = "bundle";
inline constexpr std::string_view kSvmModelFile = "model.svm";
inline constexpr std::string_view kNetworkWeightsFile = "model.h5";
inline constexpr std::string_view kGridFile = "grid.csv";

/// Phases concatenated with continuing epoch numbers.
nn::TrainingHistory merge_histories(std::span<const nn::TrainingHistory> phases);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// Writes manifest.json and, when given, history.csv, report.json and
/// report.txt.
void write_run(const std::filesystem::path& dir, const RunManifest& manifest,
               const std::optional<nn::TrainingHistory>& history, const std::optional<EvaluationReport>& report);
RunManifest read_manifest(const std::filesystem::path& run_dir);
EvaluationReport read_report(const std::filesystem::path& run_dir);

struct ComparisonRow {
  ModelKey model;
  std::vector<std::string> run_ids;
  double accuracy = 0.0;
  double precision = 0.0;  // weighted averages
  double recall = 0.0;
  double f1 = 0.0;
};

struct RunRecord {
  RunManifest manifest;
  EvaluationReport report;
};

/// One row per model in table order. Values are copied from the reports;
/// several runs of one model (seeds) are averaged.
std::vector<ComparisonRow> compare_runs(std::span<const RunRecord> runs);
std::string render_comparison(std::span<const ComparisonRow> rows);
nlohmann::ordered_json to_json(std::span<const ComparisonRow> rows);

/// Run directories found directly below `root` (those with a manifest.json),
/// sorted by name.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root);

struct CellOptions {
  std::uint64_t seed = 0;
  std::optional<std::size_t> subset;  // balanced subsample of the corpus
  std::optional<int> max_epochs;
  std::optional<int> batch_size;
  bool augment = true;  // CNN training-time augmentation
  WeightsSource weights = WeightsSource::Pretrained;
  std::filesystem::path weights_dir;
  bool svm_grid = true;
  SvmHyperParams svm_params;
  int svm_folds = 5;
  bool export_bundle = false;
  nn::FitOptions fit;
};

std::string run_id(const ModelKey& key, const CellOptions& options);

struct CellResult {
  RunManifest manifest;
  EvaluationReport report;
  std::filesystem::path dir;
};

/// Splits, trains, evaluates and writes `runs_root/<run-id>/`.
CellResult run_cell(const ModelKey& key, std::span<const LabeledImage> corpus, const std::filesystem::path& runs_root,
                    const CellOptions& options);

/// A trained model restored from a run directory.
struct StoredModel {
  RunManifest manifest;
  std::optional<SvmModel> svm;
  std::optional<nn::Network> network;
};

StoredModel load_run_model(const std::filesystem::path& run_dir);

/// Evaluates on `members` of `corpus`.
EvaluationReport evaluate_stored(StoredModel& model, std::span<const LabeledImage> corpus,
                                 std::span<const std::size_t> members);

struct ReproduceOptions {
  std::vector<ModelKey> cells = model_matrix();
  int seeds = 1;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  bool full = false;  // whole corpus and full epoch budgets
  CellOptions cell;
};

/// Desk scale unless `full`: 2,000-image balanced subset, at most 15 epochs.
std::vector<CellResult> reproduce(std::span<const LabeledImage> corpus, const std::filesystem::path& runs_root,
                                  const ReproduceOptions& options);

inline constexpr std::size_t kDeskSubset = 2000;
inline constexpr int kDeskEpochs = 15;

}  // namespace plasmodium
