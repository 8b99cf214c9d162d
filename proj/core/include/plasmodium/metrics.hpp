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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace plasmodium {

/// 2x2 counts indexed [true_class][predicted_class]; class 1 (parasitized)
/// is the positive class.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 2>, 2> counts{};
  std::array<std::string, 2> class_names{"uninfected", "parasitized"};

  std::int64_t tn() const noexcept { return counts[0][0]; }
  std::int64_t fp() const noexcept { return counts[0][1]; }
  std::int64_t fn() const noexcept { return counts[1][0]; }
  std::int64_t tp() const noexcept { return counts[1][1]; }
  std::int64_t total() const noexcept { return tn() + fp() + fn() + tp(); }
  std::int64_t support(int cls) const noexcept { return counts[cls][0] + counts[cls][1]; }

  static ConfusionMatrix from_counts(std::int64_t tn, std::int64_t fp, std::int64_t fn, std::int64_t tp);
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;  // sensitivity
  double specificity = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::array<ClassMetrics, 2> per_class{};
  double accuracy = 0.0;
  AverageMetrics macro_avg;
  AverageMetrics weighted_avg;
  double mcc = 0.0;
  std::optional<double> auc_roc;
  double fpr = 0.0;
  double fnr = 0.0;
  /// Names of quantities whose denominator was zero and were defined as 0.
  std::vector<std::string> degenerate;
};

/// Throws std::invalid_argument on length mismatch or labels outside {0, 1}.
ConfusionMatrix confusion(std::span<const int> true_labels, std::span<const int> predicted_labels);

/// `scores` are per-sample positive-class scores aligned with `true_labels`;
/// when given, auc_roc is filled in.
EvaluationReport report(const ConfusionMatrix& confusion, std::span<const int> true_labels = {},
                        std::span<const double> scores = {});

/// Area under the ROC curve by threshold sweep and trapezoidal integration.
/// Throws std::invalid_argument unless both classes are present.
double auc_roc(std::span<const int> true_labels, std::span<const double> scores);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC vertices from (0,0) to (1,1), thresholds in decreasing order. The
/// first point carries threshold +inf.
std::vector<RocPoint> roc_curve(std::span<const int> true_labels, std::span<const double> scores);
std::string roc_to_csv(std::span<const RocPoint> curve);

/// Round half to even at `digits` decimals.
double round_half_even(double value, int digits);

/// Classification-report table: per-class rows, accuracy, macro and
/// weighted averages; rates at 2 decimals, supports as integers.
std::string render_report(const EvaluationReport& report);

nlohmann::ordered_json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& json);

}  // namespace plasmodium
