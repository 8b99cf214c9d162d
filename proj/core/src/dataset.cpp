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

#include "plasmodium/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "plasmodium/error.hpp"
#include "plasmodium/png_io.hpp"

namespace plasmodium {
namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

fs::path find_class_dir(const fs::path& root, std::string_view wanted) {
  const std::string key = lower(wanted);
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && lower(entry.path().filename().string()) == key) return entry.path();
  }
  throw ConfigError("corpus root '" + root.string() + "' has no '" + std::string(wanted) +
                    "' directory (expected <root>/Uninfected and <root>/Parasitized)");
}

struct PendingFile {
  fs::path absolute;
  std::string relative;
  ClassLabel label;
};

// Transfer scheme targets: 8,000 + 3,000 per class out of 27,558 images.
constexpr std::size_t kTransferTrainPerClass = 8000;
constexpr std::size_t kTransferValPerClass = 3000;
constexpr std::size_t kTransferReferenceTotal = 27558;

}  // namespace

Corpus ingest_corpus(const fs::path& root, std::optional<std::size_t> limit_per_class, unsigned workers) {
  if (!fs::is_directory(root)) {
    throw ConfigError("corpus root '" + root.string() + "' is not a directory");
  }

  std::vector<PendingFile> pending;
  for (int cls = 0; cls < 2; ++cls) {
    const fs::path dir = find_class_dir(root, kClassDirectories[cls]);
    const std::string dir_name = dir.filename().string();
    std::vector<PendingFile> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || lower(entry.path().extension().string()) != ".png") continue;
      files.push_back({entry.path(), dir_name + "/" + entry.path().filename().string(),
                       static_cast<ClassLabel>(cls)});
    }
    std::sort(files.begin(), files.end(),
              [](const PendingFile& a, const PendingFile& b) { return a.relative < b.relative; });
    if (limit_per_class && files.size() > *limit_per_class) files.resize(*limit_per_class);
    pending.insert(pending.end(), std::make_move_iterator(files.begin()), std::make_move_iterator(files.end()));
  }
  std::sort(pending.begin(), pending.end(),
            [](const PendingFile& a, const PendingFile& b) { return a.relative < b.relative; });

  // Decode into slots indexed by sorted position so output order never depends
  // on completion order.
  std::vector<std::optional<Image>> decoded(pending.size());
  std::vector<std::string> errors(pending.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      try {
        decoded[i] = read_png(pending[i].absolute);
      } catch (const DataError& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, pending.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  Corpus corpus;
  corpus.images.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!decoded[i]) {
      ++corpus.summary.skipped;
      corpus.summary.warnings.push_back("skipped " + pending[i].relative + ": " + errors[i]);
      continue;
    }
    ++corpus.summary.loaded;
    ++corpus.summary.per_class[class_index(pending[i].label)];
    corpus.images.push_back({std::move(*decoded[i]), pending[i].label, pending[i].relative});
  }
  return corpus;
}

std::string_view to_string(SplitScheme scheme) noexcept {
  switch (scheme) {
    case SplitScheme::Svm: return "svm";
    case SplitScheme::Cnn: return "cnn";
    case SplitScheme::Transfer: return "transfer";
  }
  return "unknown";
}

SplitScheme parse_split_scheme(std::string_view text) {
  const std::string key = lower(text);
  if (key == "svm" || key == "svm_scheme") return SplitScheme::Svm;
  if (key == "cnn" || key == "cnn_scheme") return SplitScheme::Cnn;
  if (key == "transfer" || key == "transfer_scheme") return SplitScheme::Transfer;
  throw ConfigError("unknown split scheme '" + std::string(text) + "' (expected svm, cnn or transfer)");
}

SplitSizes split_sizes(SplitScheme scheme, std::size_t total, std::size_t smallest_class) {
  SplitSizes sizes;
  switch (scheme) {
    case SplitScheme::Svm:
      sizes.train = total * 70 / 100;
      sizes.validation = total * 15 / 100;
      sizes.test = total - sizes.train - sizes.validation;
      break;
    case SplitScheme::Cnn:
      sizes.train = total * 85 / 100;
      sizes.validation = (total - sizes.train) / 2;
      sizes.test = total - sizes.train - sizes.validation;
      break;
    case SplitScheme::Transfer: {
      sizes.per_class = true;
      if (smallest_class >= kTransferTrainPerClass + kTransferValPerClass) {
        sizes.train = kTransferTrainPerClass;
        sizes.validation = kTransferValPerClass;
      } else {
        sizes.fractional_fallback = true;
        sizes.train = total * kTransferTrainPerClass / kTransferReferenceTotal;
        sizes.validation = total * kTransferValPerClass / kTransferReferenceTotal;
      }
      if (sizes.train + sizes.validation > smallest_class) {
        throw ConfigError("class imbalance: the smaller class has " + std::to_string(smallest_class) +
                          " images but a balanced transfer split needs " +
                          std::to_string(sizes.train + sizes.validation) + " per class");
      }
      sizes.test = total - 2 * (sizes.train + sizes.validation);
      break;
    }
  }
  return sizes;
}

std::array<std::size_t, 2> class_counts(std::span<const LabeledImage> corpus, std::span<const std::size_t> members) {
  std::array<std::size_t, 2> counts{0, 0};
  for (std::size_t i : members) ++counts[class_index(corpus[i].label)];
  return counts;
}

namespace {

std::vector<std::size_t> sorted_indices(std::span<const LabeledImage> corpus) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return corpus[a].source_path < corpus[b].source_path; });
  return order;
}

}  // namespace

DatasetSplit make_split(std::span<const LabeledImage> corpus, SplitScheme scheme, std::uint64_t seed) {
  if (corpus.empty()) throw ConfigError("cannot split an empty corpus");

  DatasetSplit split;
  split.scheme = scheme;
  split.seed = seed;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = sorted_indices(corpus);

  if (scheme != SplitScheme::Transfer) {
    const SplitSizes sizes = split_sizes(scheme, corpus.size(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    split.train.assign(order.begin(), order.begin() + sizes.train);
    split.validation.assign(order.begin() + sizes.train, order.begin() + sizes.train + sizes.validation);
    split.test.assign(order.begin() + sizes.train + sizes.validation, order.end());
    return split;
  }

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i : order) by_class[class_index(corpus[i].label)].push_back(i);
  const SplitSizes sizes =
      split_sizes(scheme, corpus.size(), std::min(by_class[0].size(), by_class[1].size()));
  if (sizes.fractional_fallback) {
    split.warnings.push_back("corpus too small for 8,000/3,000 per-class transfer counts; using fractional sizes " +
                             std::to_string(sizes.train) + "/" + std::to_string(sizes.validation) + " per class");
  }
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    split.train.insert(split.train.end(), members.begin(), members.begin() + sizes.train);
    split.validation.insert(split.validation.end(), members.begin() + sizes.train,
                            members.begin() + sizes.train + sizes.validation);
    split.test.insert(split.test.end(), members.begin() + sizes.train + sizes.validation, members.end());
  }
  std::shuffle(split.train.begin(), split.train.end(), rng);
  std::shuffle(split.validation.begin(), split.validation.end(), rng);
  std::shuffle(split.test.begin(), split.test.end(), rng);
  return split;
}

std::vector<std::size_t> balanced_subset(std::span<const LabeledImage> corpus, std::size_t total, std::uint64_t seed) {
  const std::size_t per_class = total / 2;
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i : sorted_indices(corpus)) by_class[class_index(corpus[i].label)].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& members : by_class) {
    if (members.size() < per_class) {
      throw ConfigError("balanced subset of " + std::to_string(total) + " needs " + std::to_string(per_class) +
                        " images per class; a class has only " + std::to_string(members.size()));
    }
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

nlohmann::ordered_json split_to_json(const DatasetSplit& split, std::span<const LabeledImage> corpus) {
  auto paths = [&](const std::vector<std::size_t>& members) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (std::size_t i : members) list.push_back(corpus[i].source_path);
    return list;
  };
  nlohmann::ordered_json manifest;
  manifest["scheme"] = std::string(to_string(split.scheme));
  manifest["seed"] = split.seed;
  manifest["train"] = paths(split.train);
  manifest["validation"] = paths(split.validation);
  manifest["test"] = paths(split.test);
  return manifest;
}

DatasetSplit split_from_json(const nlohmann::json& manifest, std::span<const LabeledImage> corpus) {
  std::unordered_map<std::string, std::size_t> by_path;
  by_path.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) by_path.emplace(corpus[i].source_path, i);

  DatasetSplit split;
  split.scheme = parse_split_scheme(manifest.at("scheme").get<std::string>());
  split.seed = manifest.at("seed").get<std::uint64_t>();
  auto resolve = [&](const char* key, std::vector<std::size_t>& out) {
    for (const auto& entry : manifest.at(key)) {
      const auto path = entry.get<std::string>();
      const auto it = by_path.find(path);
      if (it == by_path.end()) throw DataError("split manifest references '" + path + "' which is not in the corpus");
      out.push_back(it->second);
    }
  };
  resolve("train", split.train);
  resolve("validation", split.validation);
  resolve("test", split.test);
  return split;
}

}  // namespace plasmodium
