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
#include <span>
#include <string>
#include <vector>

#include "plasmodium/dataset.hpp"
#include "plasmodium/preprocess.hpp"

namespace plasmodium {

using FeatureVector = std::vector<float>;

/// Standardized image flattened row-major with interleaved RGB
/// (32x32x3 = 3072 values for the SVM profile).
FeatureVector featurize(const Image& image, const PreprocessProfile& profile = PreprocessProfile::svm_features());

/// Row-major feature rows with labels (0 uninfected, 1 parasitized).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<int> labels;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  void append(std::span<const float> features, int label);
  FeatureMatrix subset(std::span<const std::size_t> rows) const;
};

FeatureMatrix featurize_all(std::span<const LabeledImage> corpus, std::span<const std::size_t> members,
                            const PreprocessProfile& profile = PreprocessProfile::svm_features());

struct SvmHyperParams {
  double C = 1.0;
  double gamma = 0.01;

  void validate() const;
};

struct SvmOptions {
  double tolerance = 1e-3;
  std::size_t cache_bytes = std::size_t{256} << 20;
  std::int64_t max_iterations = 100'000'000;
};

/// RBF-kernel SVM: f(x) = sum_i coef_i * exp(-gamma |sv_i - x|^2) - rho,
/// positive scores meaning parasitized.
struct SvmModel {
  SvmHyperParams params;
  std::size_t dim = 0;
  std::vector<float> support_vectors;  // support_count x dim
  std::vector<double> coefficients;    // alpha_i * y_i
  double rho = 0.0;
  PreprocessProfile profile = PreprocessProfile::svm_features();
  std::int64_t iterations = 0;

  std::size_t support_count() const noexcept { return coefficients.size(); }
};

/// SMO with second-order working-set selection. Throws ConfigError when the
/// training data holds a single class.
SvmModel train_svm(const FeatureMatrix& train, const SvmHyperParams& params, const SvmOptions& options = {});

struct SvmPrediction {
  ClassLabel label = ClassLabel::Uninfected;
  double score = 0.0;
};

/// A score of exactly 0 predicts uninfected.
SvmPrediction predict_svm(const SvmModel& model, std::span<const float> features);
std::vector<double> decision_scores(const SvmModel& model, const FeatureMatrix& features);

inline ClassLabel label_for_score(double score) noexcept {
  return score > 0.0 ? ClassLabel::Parasitized : ClassLabel::Uninfected;
}

struct GridCell {
  double C = 0.0;
  double gamma = 0.0;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracy;
};

struct GridSearchResult {
  SvmHyperParams best;
  double best_accuracy = 0.0;
  std::vector<GridCell> scores;  // ascending C, then ascending gamma
  int folds = 0;

  /// `C,gamma,fold_mean_accuracy`
  std::string to_csv() const;
};

inline const std::vector<double> kDefaultGridC{0.1, 1.0, 10.0, 100.0};
inline const std::vector<double> kDefaultGridGamma{0.001, 0.01, 0.1, 1.0};

/// Fold index per sample; each class is shuffled with `seed` and dealt
/// round-robin. Throws ConfigError with fewer than `folds` samples of a
/// class.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Exhaustive k-fold search. Ties go to the lowest C, then the lowest gamma.
GridSearchResult grid_search(const FeatureMatrix& train, std::span<const double> c_values,
                             std::span<const double> gamma_values, int folds = 5, std::uint64_t seed = 0,
                             const SvmOptions& options = {});

/// Binary record: magic "PLSVM1", JSON header, coefficients, support vectors.
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace plasmodium
