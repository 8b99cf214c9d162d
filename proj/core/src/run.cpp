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

#include "plasmodium/run.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "plasmodium/checksum.hpp"
#include "plasmodium/error.hpp"
#include "plasmodium/export.hpp"
#include "plasmodium/keras_h5.hpp"

namespace plasmodium {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::Svm: return "svm";
    case ModelFamily::Cnn: return "cnn";
    case ModelFamily::Transfer: return "transfer";
  }
  return "svm";
}

int backbone_row(Backbone b) {
  switch (b) {
    case Backbone::Vgg19: return 0;
    case Backbone::InceptionV3: return 1;
    case Backbone::Xception: return 2;
  }
  return 0;
}

int regime_row(Regime r) {
  switch (r) {
    case Regime::FrozenHeadOnly: return 0;
    case Regime::IncrementalUnfreeze: return 1;
    case Regime::FullFineTune: return 2;
  }
  return 0;
}

ordered_json history_summary(const nn::TrainingHistory& h) {
  return {{"epochs_run", h.epochs.size()},
          {"best_epoch", h.best_epoch},
          {"early_stopped", h.early_stopped},
          {"restored_best", h.restored_best}};
}

EvaluationReport svm_report(const SvmModel& model, const FeatureMatrix& test) {
  const auto scores = decision_scores(model, test);
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = class_index(label_for_score(scores[i]));
  const auto cm = confusion(test.labels, predicted);
  if (cm.support(0) == 0 || cm.support(1) == 0) return report(cm);
  return report(cm, test.labels, scores);
}

}  // namespace

std::string ModelKey::id() const {
  switch (family) {
    case ModelFamily::Svm: return "svm";
    case ModelFamily::Cnn: return fmt::format("cnn-{}", to_string(arch));
    case ModelFamily::Transfer: return fmt::format("{}-{}", to_string(backbone), to_string(regime));
  }
  return "svm";
}

std::string_view ModelKey::method() const noexcept {
  switch (family) {
    case ModelFamily::Svm: return "machine learning";
    case ModelFamily::Cnn: return "deep learning";
    case ModelFamily::Transfer: return "transfer learning";
  }
  return "";
}

std::string_view ModelKey::model_name() const noexcept {
  switch (family) {
    case ModelFamily::Svm: return "SVM";
    case ModelFamily::Cnn: return arch == CnnArch::A ? "CNN-A" : "CNN-B";
    case ModelFamily::Transfer:
      switch (backbone) {
        case Backbone::Vgg19: return "VGG19";
        case Backbone::InceptionV3: return "InceptionV3";
        case Backbone::Xception: return "Xception";
      }
  }
  return "";
}

std::string_view ModelKey::training_mode() const noexcept {
  switch (family) {
    case ModelFamily::Svm: return "RBF kernel, grid-searched C and gamma";
    case ModelFamily::Cnn:
      return arch == CnnArch::A ? "dropout, weight init, batch norm" : "dropout, weight init, zero padding";
    case ModelFamily::Transfer:
      switch (regime) {
        case Regime::FrozenHeadOnly: return "frozen backbone, head only";
        case Regime::IncrementalUnfreeze: return "incremental unfreezing";
        case Regime::FullFineTune: return "full fine-tuning";
      }
  }
  return "";
}

int ModelKey::grid_position() const noexcept {
  switch (family) {
    case ModelFamily::Svm: return 0;
    case ModelFamily::Cnn: return arch == CnnArch::A ? 1 : 2;
    case ModelFamily::Transfer: return 3 + 3 * backbone_row(backbone) + regime_row(regime);
  }
  return 0;
}

SplitScheme ModelKey::split_scheme() const noexcept {
  switch (family) {
    case ModelFamily::Svm: return SplitScheme::Svm;
    case ModelFamily::Cnn: return SplitScheme::Cnn;
    case ModelFamily::Transfer: return SplitScheme::Transfer;
  }
  return SplitScheme::Svm;
}

PreprocessProfile ModelKey::profile() const {
  switch (family) {
    case ModelFamily::Svm: return PreprocessProfile::svm_features();
    case ModelFamily::Cnn: return cnn_profile(arch);
    case ModelFamily::Transfer: return PreprocessProfile::small();
  }
  return PreprocessProfile::small();
}

ModelKey parse_model_id(std::string_view id) {
  for (const auto& key : model_matrix()) {
    if (key.id() == id) return key;
  }
  throw ConfigError(fmt::format("unknown model id '{}'", id));
}

std::vector<ModelKey> model_matrix() {
  std::vector<ModelKey> cells;
  cells.push_back({});
  cells.push_back({ModelFamily::Cnn, CnnArch::A});
  cells.push_back({ModelFamily::Cnn, CnnArch::B});
  for (Backbone b : kBackbones) {
    for (Regime r : kRegimes) cells.push_back({ModelFamily::Transfer, CnnArch::A, b, r});
  }
  return cells;
}

std::string RunManifest::hash() const {
  return to_json(*this).at("manifest_hash").get<std::string>();
}

ordered_json to_json(const RunManifest& m) {
  ordered_json j;
  j["run_id"] = m.run_id;
  j["model"] = {{"id", m.model.id()}, {"family", family_name(m.model.family)}, {"name", m.model.model_name()},
                {"training_mode", m.model.training_mode()}};
  j["seed"] = m.seed;
  j["split"] = {{"scheme", to_string(m.scheme)}, {"hash", m.split_hash}, {"corpus_size", m.corpus_size},
                {"subset", m.subset ? ordered_json(*m.subset) : ordered_json(nullptr)}};
  j["preprocess"] = to_json(m.profile);
  j["config"] = m.config;
  j["metrics"] = m.metrics ? to_json(*m.metrics) : ordered_json(nullptr);
  j["warnings"] = m.warnings;
  j["manifest_hash"] = "";
  ordered_json unhashed = j;
  unhashed.erase("manifest_hash");
  // Sorted keys, so a manifest read back from disk hashes the same.
  j["manifest_hash"] = to_hex(fnv1a64(json(unhashed).dump()));
  return j;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.model = parse_model_id(j.at("model").at("id").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& split = j.at("split");
  m.scheme = parse_split_scheme(split.at("scheme").get<std::string>());
  m.split_hash = split.at("hash").get<std::string>();
  m.corpus_size = split.at("corpus_size").get<std::size_t>();
  if (!split.at("subset").is_null()) m.subset = split.at("subset").get<std::size_t>();
  m.profile = profile_from_json(j.at("preprocess"));
  m.config = ordered_json::parse(j.at("config").dump());
  if (!j.at("metrics").is_null()) m.metrics = report_from_json(j.at("metrics"));
  m.warnings = j.value("warnings", std::vector<std::string>{});
  return m;
}

std::string split_hash(const DatasetSplit& split, std::span<const LabeledImage> corpus) {
  return to_hex(fnv1a64(split_to_json(split, corpus).dump()));
}

nn::TrainingHistory merge_histories(std::span<const nn::TrainingHistory> phases) {
  nn::TrainingHistory merged;
  int offset = 0;
  for (const auto& h : phases) {
    for (auto e : h.epochs) {
      e.epoch += offset;
      merged.epochs.push_back(e);
    }
    if (h.best_epoch > 0) merged.best_epoch = h.best_epoch + offset;
    merged.early_stopped = h.early_stopped;
    merged.restored_best = h.restored_best;
    offset += static_cast<int>(h.epochs.size());
  }
  return merged;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_run(const std::filesystem::path& dir, const RunManifest& manifest,
               const std::optional<nn::TrainingHistory>& history, const std::optional<EvaluationReport>& report) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / kManifestFile, to_json(manifest).dump(2) + "\n");
  if (history) write_text_file(dir / kHistoryFile, history->to_csv());
  if (report) {
    write_text_file(dir / kReportJsonFile, to_json(*report).dump(2) + "\n");
    write_text_file(dir / kReportTextFile, render_report(*report));
  }
}

RunManifest read_manifest(const std::filesystem::path& run_dir) {
  const auto parsed = json::parse(read_text_file(run_dir / kManifestFile), nullptr, false);
  if (parsed.is_discarded()) throw DataError((run_dir / kManifestFile).string() + " is not valid JSON");
  return manifest_from_json(parsed);
}

EvaluationReport read_report(const std::filesystem::path& run_dir) {
  const auto parsed = json::parse(read_text_file(run_dir / kReportJsonFile), nullptr, false);
  if (parsed.is_discarded()) throw DataError((run_dir / kReportJsonFile).string() + " is not valid JSON");
  return report_from_json(parsed);
}

std::vector<ComparisonRow> compare_runs(std::span<const RunRecord> runs) {
  std::map<int, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) groups[r.manifest.model.grid_position()].push_back(&r);
  std::vector<ComparisonRow> rows;
  for (auto& [position, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->manifest.run_id < b->manifest.run_id; });
    ComparisonRow row;
    row.model = members.front()->manifest.model;
    for (const auto* m : members) {
      row.run_ids.push_back(m->manifest.run_id);
      row.accuracy += m->report.accuracy;
      row.precision += m->report.weighted_avg.precision;
      row.recall += m->report.weighted_avg.recall;
      row.f1 += m->report.weighted_avg.f1;
    }
    if (members.size() > 1) {
      const auto n = static_cast<double>(members.size());
      row.accuracy /= n;
      row.precision /= n;
      row.recall /= n;
      row.f1 /= n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_comparison(std::span<const ComparisonRow> rows) {
  std::size_t w_method = 6, w_model = 5, w_mode = 4;
  for (const auto& r : rows) {
    w_method = std::max(w_method, r.model.method().size());
    w_model = std::max(w_model, r.model.model_name().size());
    w_mode = std::max(w_mode, r.model.training_mode().size());
  }
  std::string out = fmt::format("{:<{}}  {:<{}}  {:<{}}  {:>8}  {:>9}  {:>6}  {:>8}  {:>4}\n", "method", w_method,
                                "model", w_model, "mode", w_mode, "accuracy", "precision", "recall", "f1-score",
                                "runs");
  std::string_view last_method, last_model;
  for (const auto& r : rows) {
    const auto method = r.model.method() == last_method ? std::string_view{} : r.model.method();
    const auto model =
        r.model.model_name() == last_model && method.empty() ? std::string_view{} : r.model.model_name();
    out += fmt::format("{:<{}}  {:<{}}  {:<{}}  {:>8.2f}  {:>9.2f}  {:>6.2f}  {:>8.2f}  {:>4}\n", method, w_method,
                       model, w_model, r.model.training_mode(), w_mode, round_half_even(r.accuracy, 2),
                       round_half_even(r.precision, 2), round_half_even(r.recall, 2), round_half_even(r.f1, 2),
                       r.run_ids.size());
    last_method = r.model.method();
    last_model = r.model.model_name();
  }
  return out;
}

ordered_json to_json(std::span<const ComparisonRow> rows) {
  ordered_json out = ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"model", r.model.id()},
                   {"method", r.model.method()},
                   {"name", r.model.model_name()},
                   {"training_mode", r.model.training_mode()},
                   {"runs", r.run_ids},
                   {"accuracy", r.accuracy},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1}});
  }
  return out;
}

std::vector<std::filesystem::path> find_runs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> runs;
  if (std::filesystem::exists(root / kManifestFile)) runs.push_back(root);
  if (!std::filesystem::is_directory(root)) return runs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / kManifestFile)) runs.push_back(entry.path());
  }
  std::sort(runs.begin(), runs.end());
  return runs;
}

std::string run_id(const ModelKey& key, const CellOptions& options) {
  std::string id = fmt::format("{}-s{}", key.id(), options.seed);
  if (options.subset) id += fmt::format("-n{}", *options.subset);
  if (options.max_epochs) id += fmt::format("-e{}", *options.max_epochs);
  return id;
}

CellResult run_cell(const ModelKey& key, std::span<const LabeledImage> corpus, const std::filesystem::path& runs_root,
                    const CellOptions& options) {
  std::vector<LabeledImage> sampled;
  std::span<const LabeledImage> view = corpus;
  if (options.subset) {
    for (std::size_t i : balanced_subset(corpus, *options.subset, options.seed)) sampled.push_back(corpus[i]);
    view = sampled;
  }
  const auto split = make_split(view, key.split_scheme(), options.seed);

  CellResult result;
  auto& m = result.manifest;
  m.run_id = run_id(key, options);
  m.model = key;
  m.seed = options.seed;
  m.scheme = split.scheme;
  m.split_hash = split_hash(split, view);
  m.corpus_size = view.size();
  m.subset = options.subset;
  m.profile = key.profile();
  m.warnings = split.warnings;
  result.dir = runs_root / m.run_id;
  std::filesystem::create_directories(result.dir);
  write_text_file(result.dir / kSplitFile, split_to_json(split, view).dump(1) + "\n");

  std::optional<nn::TrainingHistory> history;
  std::optional<nn::Network> network;

  if (key.family == ModelFamily::Svm) {
    const auto train = featurize_all(view, split.train, m.profile);
    const auto test = featurize_all(view, split.test, m.profile);
    SvmHyperParams params = options.svm_params;
    if (options.svm_grid) {
      const auto grid = grid_search(train, kDefaultGridC, kDefaultGridGamma, options.svm_folds, options.seed);
      params = grid.best;
      write_text_file(result.dir / kGridFile, grid.to_csv());
      m.config["grid"] = {{"C", kDefaultGridC}, {"gamma", kDefaultGridGamma}, {"folds", options.svm_folds},
                          {"best_cv_accuracy", grid.best_accuracy}};
    }
    auto model = train_svm(train, params);
    m.config["params"] = {{"C", params.C}, {"gamma", params.gamma}};
    m.config["support_vectors"] = model.support_count();
    m.config["solver_iterations"] = model.iterations;
    result.report = svm_report(model, test);
    save_svm(model, result.dir / kSvmModelFile);
  } else if (key.family == ModelFamily::Cnn) {
    auto config = cnn_train_config(key.arch);
    if (options.max_epochs) config.max_epochs = *options.max_epochs;
    if (options.batch_size) config.batch_size = *options.batch_size;
    auto train_profile = m.profile;
    if (options.augment) {
      AugmentConfig augment;
      augment.seed = options.seed;
      train_profile.augment = augment;
    }
    auto trained = train_model(build_cnn(key.arch), view, split, train_profile, config, options.seed, options.fit);
    m.config["train"] = nn::to_json(config);
    m.config["augment"] = options.augment;
    m.config["history"] = history_summary(trained.history);
    m.config["parameters"] = trained.network.parameter_counts().parameters();
    result.report = to_report(nn::evaluate(trained.network, {view, split.test}, m.profile));
    history = std::move(trained.history);
    network = std::move(trained.network);
  } else {
    const auto model = build_transfer_model(key.backbone);
    auto base = nn::TrainConfig::sgd_default();
    if (options.batch_size) base.batch_size = *options.batch_size;
    RegimeBudget budget;
    if (options.max_epochs) {
      budget.epochs = *options.max_epochs;
      budget.phase1_epochs = std::max(1, *options.max_epochs * 3 / 10);
      budget.phase2_epochs = std::max(1, *options.max_epochs - budget.phase1_epochs);
    }
    const auto spec = make_regime(key.regime, model, base, budget);
    auto run = run_regime(model, spec, view, split, options.seed, options.weights,
                          options.weights_dir.empty() ? default_weights_dir() : options.weights_dir, options.fit);
    m.config["backbone"] = to_string(key.backbone);
    m.config["regime"] = to_string(key.regime);
    m.config["weights"] = options.weights == WeightsSource::Pretrained ? "imagenet" : "random";
    ordered_json phases = ordered_json::array();
    for (std::size_t p = 0; p < spec.phases.size(); ++p) {
      phases.push_back({{"train", nn::to_json(spec.phases[p].config)},
                        {"trainable_params", run.masks[p].trainable_params},
                        {"frozen_params", run.masks[p].frozen_params},
                        {"history", history_summary(run.histories[p])}});
    }
    m.config["phases"] = std::move(phases);
    result.report = run.report;
    history = merge_histories(run.histories);
    network = std::move(run.network);
  }

  m.metrics = result.report;
  if (network) write_keras_h5(*network, result.dir / kNetworkWeightsFile);
  write_run(result.dir, m, history, result.report);
  if (options.export_bundle && network) {
    export_model(*network, m.profile, {key.id(), m.hash(), result.report}, probe_batch(view, split.test, m.profile),
                 result.dir / kBundleDir);
  }
  return result;
}

StoredModel load_run_model(const std::filesystem::path& run_dir) {
  StoredModel stored;
  stored.manifest = read_manifest(run_dir);
  const auto& key = stored.manifest.model;
  if (key.family == ModelFamily::Svm) {
    stored.svm = load_svm(run_dir / kSvmModelFile);
    return stored;
  }
  auto graph = key.family == ModelFamily::Cnn ? build_cnn(key.arch) : build_transfer_model(key.backbone).graph;
  stored.network.emplace(std::move(graph), stored.manifest.seed);
  load_keras_weights(*stored.network, run_dir / kNetworkWeightsFile);
  return stored;
}

EvaluationReport evaluate_stored(StoredModel& model, std::span<const LabeledImage> corpus,
                                 std::span<const std::size_t> members) {
  if (members.empty()) throw ConfigError("nothing to evaluate: the selection is empty");
  if (model.svm) return svm_report(*model.svm, featurize_all(corpus, members, model.svm->profile));
  return to_report(nn::evaluate(*model.network, {corpus, members}, model.manifest.profile));
}

std::vector<CellResult> reproduce(std::span<const LabeledImage> corpus, const std::filesystem::path& runs_root,
                                  const ReproduceOptions& options) {
  if (options.seeds < 1) throw ConfigError("--seeds must be at least 1");
  if (options.jobs < 1) throw ConfigError("--jobs must be at least 1");
  std::vector<std::pair<ModelKey, CellOptions>> work;
  for (int s = 0; s < options.seeds; ++s) {
    for (const auto& key : options.cells) {
      CellOptions cell = options.cell;
      cell.seed = options.base_seed + static_cast<std::uint64_t>(s);
      if (!options.full) {
        if (!cell.subset) cell.subset = std::min(kDeskSubset, corpus.size() - corpus.size() % 2);
        cell.max_epochs = std::min(cell.max_epochs.value_or(kDeskEpochs), kDeskEpochs);
      }
      work.emplace_back(key, cell);
    }
  }
  std::vector<CellResult> results(work.size());
  for (std::size_t begin = 0; begin < work.size(); begin += static_cast<std::size_t>(options.jobs)) {
    const std::size_t end = std::min(work.size(), begin + static_cast<std::size_t>(options.jobs));
    std::vector<std::future<CellResult>> running;
    for (std::size_t i = begin; i < end; ++i) {
      running.push_back(std::async(std::launch::async, [&, i] {
        return run_cell(work[i].first, corpus, runs_root, work[i].second);
      }));
    }
    for (std::size_t i = begin; i < end; ++i) results[i] = running[i - begin].get();
  }
  return results;
}

}  // namespace plasmodium
