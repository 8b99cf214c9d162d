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

// plasmodium: command-line front end for ingestion, training, evaluation,
// export and reporting.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "plasmodium/dataset.hpp"
#include "plasmodium/error.hpp"
#include "plasmodium/export.hpp"
#include "plasmodium/metrics.hpp"
#include "plasmodium/run.hpp"

namespace fs = std::filesystem;
using namespace plasmodium;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Corpus location or weights were not found; reported with exit code 1.
struct MissingData : Error {
  using Error::Error;
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

struct Common {
  std::string data_dir = env_or("PLASMODIUM_DATA_DIR", "");
  std::string runs_dir = "runs";
  std::string weights_dir = env_or("PLASMODIUM_WEIGHTS_DIR", "");
  std::optional<std::size_t> limit_per_class;
};

Corpus load_corpus(const Common& common) {
  if (common.data_dir.empty()) {
    throw MissingData(fmt::format(
        "no corpus given: pass --data-dir or set PLASMODIUM_DATA_DIR to the NIH malaria cell image folder ({})",
        kCorpusCitationUrl));
  }
  try {
    auto corpus = ingest_corpus(common.data_dir, common.limit_per_class);
    if (corpus.images.empty()) throw ConfigError("no readable images under " + common.data_dir);
    return corpus;
  } catch (const ConfigError& e) {
    throw MissingData(fmt::format("{}\nthe NIH malaria cell images are available from {}", e.what(),
                                  kCorpusCitationUrl));
  }
}

void add_common(CLI::App& cmd, Common& common, bool needs_data = true) {
  if (needs_data) {
    cmd.add_option("--data-dir", common.data_dir, "Corpus root with Parasitized/ and Uninfected/");
    cmd.add_option("--limit-per-class", common.limit_per_class, "Read at most N images per class");
  }
  cmd.add_option("--runs-dir", common.runs_dir, "Directory holding run directories")->capture_default_str();
}

void print_epoch(const nn::EpochRecord& r) {
  fmt::print(stderr, "epoch {:3d}  lr {:.2e}  loss {:.4f}  acc {:.4f}", r.epoch, r.learning_rate, r.train_loss,
             r.train_accuracy);
  if (r.val_loss) fmt::print(stderr, "  val_loss {:.4f}  val_acc {:.4f}", *r.val_loss, *r.val_accuracy);
  fmt::print(stderr, "\n");
}

struct TrainFlags {
  std::uint64_t seed = 0;
  std::optional<std::size_t> subset;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  bool no_augment = false;
  bool random_init = false;
  bool export_bundle = false;
  bool quiet = false;
};

void add_train_flags(CLI::App& cmd, TrainFlags& f, bool network) {
  cmd.add_option("--seed", f.seed, "Random seed")->capture_default_str();
  cmd.add_option("--subset", f.subset, "Train on a class-balanced subsample of N images");
  if (!network) return;
  cmd.add_option("--epochs", f.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  cmd.add_option("--batch-size", f.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  cmd.add_flag("--export", f.export_bundle, "Also write a browser bundle to <run>/bundle");
  cmd.add_flag("--quiet", f.quiet, "Do not print per-epoch progress");
}

CellOptions cell_options(const TrainFlags& f, const Common& common) {
  CellOptions o;
  o.seed = f.seed;
  o.subset = f.subset;
  o.max_epochs = f.epochs;
  o.batch_size = f.batch_size;
  o.augment = !f.no_augment;
  o.weights = f.random_init ? WeightsSource::RandomInit : WeightsSource::Pretrained;
  o.weights_dir = common.weights_dir.empty() ? default_weights_dir() : fs::path(common.weights_dir);
  o.export_bundle = f.export_bundle;
  if (!f.quiet) {
    o.fit.on_epoch_end = [](const nn::EpochRecord& r, nn::Network&) {
      print_epoch(r);
      return true;
    };
  }
  return o;
}

void print_cell(const CellResult& r) {
  fmt::print("run {} -> {}\n{}", r.manifest.run_id, r.dir.string(), render_report(r.report));
  fmt::print("MCC {:.3f}", r.report.mcc);
  if (r.report.auc_roc) fmt::print("  AUC {:.4f}", *r.report.auc_roc);
  fmt::print("\n");
}

std::vector<double> parse_list(const std::vector<double>& given, const std::vector<double>& fallback) {
  return given.empty() ? fallback : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Malaria blood-smear cell classification: training, evaluation and export"};
  app.require_subcommand(1);
  Common common;

  auto* ingest = app.add_subcommand("ingest", "Summarize the image corpus");
  add_common(*ingest, common);

  std::string scheme_name = "svm", split_out;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Write a train/validation/test split manifest");
  add_common(*split, common);
  split->add_option("--scheme", scheme_name, "svm, cnn or transfer")
      ->check(CLI::IsMember({"svm", "cnn", "transfer"}))
      ->capture_default_str();
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out", split_out, "Output JSON path (default: stdout)");

  TrainFlags svm_flags;
  bool no_grid = false;
  double svm_c = 1.0, svm_gamma = 0.01;
  auto* train_svm_cmd = app.add_subcommand("train-svm", "Grid-search and train the RBF SVM baseline");
  add_common(*train_svm_cmd, common);
  add_train_flags(*train_svm_cmd, svm_flags, false);
  train_svm_cmd->add_flag("--no-grid", no_grid, "Skip the grid search and use --C/--gamma");
  train_svm_cmd->add_option("--C", svm_c, "Penalty when --no-grid")->capture_default_str();
  train_svm_cmd->add_option("--gamma", svm_gamma, "RBF width when --no-grid")->capture_default_str();

  TrainFlags grid_flags;
  int folds = 5;
  std::vector<double> grid_c, grid_gamma;
  std::string grid_out;
  auto* grid = app.add_subcommand("grid-search", "Cross-validated (C, gamma) search on the SVM training split");
  add_common(*grid, common);
  add_train_flags(*grid, grid_flags, false);
  grid->add_option("--folds", folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 100));
  grid->add_option("--C", grid_c, "C values (default 0.1 1 10 100)");
  grid->add_option("--gamma", grid_gamma, "gamma values (default 0.001 0.01 0.1 1)");
  grid->add_option("--out", grid_out, "Write the score table as CSV");

  TrainFlags cnn_flags;
  std::string arch_name;
  auto* train_cnn = app.add_subcommand("train-cnn", "Train CNN architecture a or b from scratch");
  add_common(*train_cnn, common);
  add_train_flags(*train_cnn, cnn_flags, true);
  train_cnn->add_option("--arch", arch_name, "a or b")->required()->check(CLI::IsMember({"a", "b"}));
  train_cnn->add_flag("--no-augment", cnn_flags.no_augment, "Disable training-time augmentation");

  TrainFlags tl_flags;
  std::string backbone_name, regime_name;
  auto* train_tl = app.add_subcommand("train-transfer", "Fine-tune a pretrained backbone under one regime");
  add_common(*train_tl, common);
  add_train_flags(*train_tl, tl_flags, true);
  train_tl->add_option("--backbone", backbone_name, "vgg19, inceptionv3 or xception")
      ->required()
      ->check(CLI::IsMember({"vgg19", "inceptionv3", "xception"}));
  train_tl->add_option("--regime", regime_name, "frozen, incremental or full")
      ->required()
      ->check(CLI::IsMember({"frozen", "incremental", "full"}));
  train_tl->add_option("--weights-dir", common.weights_dir, "Directory with the Keras ImageNet snapshots");
  train_tl->add_flag("--random-init", tl_flags.random_init, "Use random backbone weights instead of ImageNet");

  std::string eval_run, eval_split, eval_partition = "test", eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a stored run on a split partition");
  add_common(*evaluate, common);
  evaluate->add_option("--run", eval_run, "Run directory")->required();
  evaluate->add_option("--split", eval_split, "Split manifest (default: the run's split.json)");
  evaluate->add_option("--partition", eval_partition, "train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  evaluate->add_option("--out", eval_out, "Directory for report.json and report.txt (default: the run directory)");

  std::string export_run, export_out, export_catalog, export_name, export_url;
  auto* export_cmd = app.add_subcommand("export", "Write a browser bundle for a stored run");
  add_common(*export_cmd, common);
  export_cmd->add_option("--run", export_run, "Run directory")->required();
  export_cmd->add_option("--out", export_out, "Bundle directory (default: <run>/bundle)");
  export_cmd->add_option("--catalog", export_catalog, "Add the bundle to this models/catalog.json");
  export_cmd->add_option("--display-name", export_name, "Catalog display name");
  export_cmd->add_option("--bundle-url", export_url, "Catalog URL of model.json (default: <id>/model.json)");

  bool compare = false;
  std::vector<std::string> report_runs;
  std::string report_json;
  auto* report_cmd = app.add_subcommand("report", "Summarize run reports");
  add_common(*report_cmd, common, false);
  report_cmd->add_flag("--compare", compare, "Emit the model x training-mode comparison table");
  report_cmd->add_option("runs", report_runs, "Run directories (default: every run under --runs-dir)");
  report_cmd->add_option("--json", report_json, "Also write the table as JSON");

  TrainFlags repro_flags;
  ReproduceOptions repro;
  std::vector<std::string> repro_cells;
  auto* repro_cmd = app.add_subcommand("reproduce", "Run the twelve-cell model matrix");
  add_common(*repro_cmd, common);
  add_train_flags(*repro_cmd, repro_flags, true);
  repro_cmd->add_flag("--full", repro.full, "Whole corpus and full epoch budgets (hours)");
  repro_cmd->add_option("--seeds", repro.seeds, "Seeds per cell; the comparison averages them")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  repro_cmd->add_option("--jobs", repro.jobs, "Cells run in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  repro_cmd->add_option("--cells", repro_cells, "Subset of model ids (e.g. svm cnn-b xception-full)");
  repro_cmd->add_option("--weights-dir", common.weights_dir, "Directory with the Keras ImageNet snapshots");
  repro_cmd->add_flag("--random-init", repro_flags.random_init, "Use random backbone weights instead of ImageNet");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fmt::print(stderr, "error: {}\n\n{}", e.what(), app.help());
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) {
      const auto corpus = load_corpus(common);
      const auto& s = corpus.summary;
      fmt::print("images {}  uninfected {}  parasitized {}  skipped {}\n", s.loaded, s.per_class[0], s.per_class[1],
                 s.skipped);
      for (const auto& w : s.warnings) fmt::print(stderr, "warning: {}\n", w);
    } else if (split->parsed()) {
      const auto corpus = load_corpus(common);
      const auto result = make_split(corpus.images, parse_split_scheme(scheme_name), split_seed);
      for (const auto& w : result.warnings) fmt::print(stderr, "warning: {}\n", w);
      const auto text = split_to_json(result, corpus.images).dump(1) + "\n";
      if (split_out.empty()) {
        fmt::print("{}", text);
      } else {
        write_text_file(split_out, text);
        fmt::print(stderr, "train {}  validation {}  test {} -> {}\n", result.train.size(), result.validation.size(),
                   result.test.size(), split_out);
      }
    } else if (train_svm_cmd->parsed()) {
      const auto corpus = load_corpus(common);
      auto options = cell_options(svm_flags, common);
      options.svm_grid = !no_grid;
      options.svm_params = {svm_c, svm_gamma};
      print_cell(run_cell(ModelKey{}, corpus.images, common.runs_dir, options));
    } else if (grid->parsed()) {
      const auto corpus = load_corpus(common);
      std::vector<LabeledImage> sampled;
      std::span<const LabeledImage> view = corpus.images;
      if (grid_flags.subset) {
        for (std::size_t i : balanced_subset(view, *grid_flags.subset, grid_flags.seed)) sampled.push_back(view[i]);
        view = sampled;
      }
      const auto s = make_split(view, SplitScheme::Svm, grid_flags.seed);
      const auto result = grid_search(featurize_all(view, s.train), parse_list(grid_c, kDefaultGridC),
                                      parse_list(grid_gamma, kDefaultGridGamma), folds, grid_flags.seed);
      const auto csv = result.to_csv();
      if (!grid_out.empty()) write_text_file(grid_out, csv);
      fmt::print("{}best C={} gamma={} (cv accuracy {:.4f})\n", csv, result.best.C, result.best.gamma,
                 result.best_accuracy);
    } else if (train_cnn->parsed()) {
      const auto corpus = load_corpus(common);
      const ModelKey key{ModelFamily::Cnn, parse_cnn_arch(arch_name)};
      print_cell(run_cell(key, corpus.images, common.runs_dir, cell_options(cnn_flags, common)));
    } else if (train_tl->parsed()) {
      const auto corpus = load_corpus(common);
      const ModelKey key{ModelFamily::Transfer, CnnArch::A, parse_backbone(backbone_name), parse_regime(regime_name)};
      print_cell(run_cell(key, corpus.images, common.runs_dir, cell_options(tl_flags, common)));
    } else if (evaluate->parsed()) {
      auto stored = load_run_model(eval_run);
      const auto corpus = load_corpus(common);
      const fs::path split_path = eval_split.empty() ? fs::path(eval_run) / kSplitFile : fs::path(eval_split);
      const auto manifest = nlohmann::json::parse(read_text_file(split_path));
      const auto s = split_from_json(manifest, corpus.images);
      const auto& members = eval_partition == "train" ? s.train : eval_partition == "validation" ? s.validation : s.test;
      const auto report = evaluate_stored(stored, corpus.images, members);
      const fs::path out = eval_out.empty() ? fs::path(eval_run) : fs::path(eval_out);
      write_text_file(out / kReportJsonFile, to_json(report).dump(2) + "\n");
      write_text_file(out / kReportTextFile, render_report(report));
      fmt::print("{}MCC {:.3f}\n", render_report(report), report.mcc);
    } else if (export_cmd->parsed()) {
      auto stored = load_run_model(export_run);
      if (!stored.network) throw ConfigError("only neural-network runs can be exported to a browser bundle");
      const auto corpus = load_corpus(common);
      const auto s = split_from_json(nlohmann::json::parse(read_text_file(fs::path(export_run) / kSplitFile)),
                                     corpus.images);
      const auto& m = stored.manifest;
      const fs::path out = export_out.empty() ? fs::path(export_run) / kBundleDir : fs::path(export_out);
      const auto bundle = export_model(*stored.network, m.profile, {m.model.id(), m.hash(), m.metrics},
                                       probe_batch(corpus.images, s.test, m.profile), out);
      fmt::print("bundle {}  fidelity max |dp| = {:.3g} on {} probe images\n", out.string(),
                 bundle.fidelity->max_abs_diff, bundle.fidelity->probe_size);
      if (!export_catalog.empty()) {
        const std::string id = m.model.id();
        upsert_catalog(export_catalog,
                       catalog_entry(bundle, id,
                                     export_name.empty() ? fmt::format("{} ({})", m.model.model_name(),
                                                                       m.model.training_mode())
                                                         : export_name,
                                     export_url.empty() ? id + "/model.json" : export_url));
      }
    } else if (report_cmd->parsed()) {
      if (!compare) throw ConfigError("report currently supports --compare only");
      std::vector<fs::path> dirs;
      if (report_runs.empty()) {
        dirs = find_runs(common.runs_dir);
      } else {
        for (const auto& r : report_runs) dirs.emplace_back(r);
      }
      if (dirs.empty()) throw ConfigError("no run manifests found under " + common.runs_dir);
      std::vector<RunRecord> records;
      for (const auto& d : dirs) records.push_back({read_manifest(d), read_report(d)});
      const auto rows = compare_runs(records);
      fmt::print("{}", render_comparison(rows));
      if (!report_json.empty()) write_text_file(report_json, to_json(rows).dump(2) + "\n");
    } else if (repro_cmd->parsed()) {
      const auto corpus = load_corpus(common);
      repro.base_seed = repro_flags.seed;
      repro.cell = cell_options(repro_flags, common);
      repro.cell.subset = repro_flags.subset;
      if (!repro_cells.empty()) {
        repro.cells.clear();
        for (const auto& id : repro_cells) repro.cells.push_back(parse_model_id(id));
      }
      const auto results = reproduce(corpus.images, common.runs_dir, repro);
      std::vector<RunRecord> records;
      for (const auto& r : results) records.push_back({r.manifest, r.report});
      fmt::print("{}", render_comparison(compare_runs(records)));
    }
  } catch (const MissingData& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  } catch (const SnapshotUnavailable& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return 0;
}
