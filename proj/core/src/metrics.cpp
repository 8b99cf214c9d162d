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

#include "plasmodium/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace plasmodium {

ConfusionMatrix ConfusionMatrix::from_counts(std::int64_t tn, std::int64_t fp, std::int64_t fn, std::int64_t tp) {
  ConfusionMatrix m;
  m.counts = {{{tn, fp}, {fn, tp}}};
  return m;
}

ConfusionMatrix confusion(std::span<const int> true_labels, std::span<const int> predicted_labels) {
  if (true_labels.size() != predicted_labels.size()) {
    throw std::invalid_argument(fmt::format("label sequences differ in length ({} vs {})", true_labels.size(),
                                            predicted_labels.size()));
  }
  ConfusionMatrix m;
  for (std::size_t k = 0; k < true_labels.size(); ++k) {
    const int t = true_labels[k];
    const int p = predicted_labels[k];
    if (t < 0 || t > 1 || p < 0 || p > 1) {
      throw std::invalid_argument(fmt::format("label out of range at position {} (true={}, predicted={})", k, t, p));
    }
    ++m.counts[t][p];
  }
  return m;
}

namespace {

double ratio(std::int64_t num, std::int64_t den, const char* name, std::vector<std::string>& degenerate) {
  if (den == 0) {
    degenerate.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvaluationReport report(const ConfusionMatrix& cm, std::span<const int> true_labels, std::span<const double> scores) {
  EvaluationReport r;
  r.confusion = cm;
  const std::int64_t total = cm.total();

  static constexpr const char* kPrecision[2] = {"precision[uninfected]", "precision[parasitized]"};
  static constexpr const char* kRecall[2] = {"recall[uninfected]", "recall[parasitized]"};
  static constexpr const char* kSpecificity[2] = {"specificity[uninfected]", "specificity[parasitized]"};
  for (int c = 0; c < 2; ++c) {
    const int o = 1 - c;
    const std::int64_t predicted = cm.counts[0][c] + cm.counts[1][c];
    ClassMetrics& m = r.per_class[c];
    m.support = cm.support(c);
    m.precision = ratio(cm.counts[c][c], predicted, kPrecision[c], r.degenerate);
    m.recall = ratio(cm.counts[c][c], m.support, kRecall[c], r.degenerate);
    m.specificity = ratio(cm.counts[o][o], cm.support(o), kSpecificity[c], r.degenerate);
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }

  r.accuracy = ratio(cm.tn() + cm.tp(), total, "accuracy", r.degenerate);

  r.macro_avg.precision = (r.per_class[0].precision + r.per_class[1].precision) / 2.0;
  r.macro_avg.recall = (r.per_class[0].recall + r.per_class[1].recall) / 2.0;
  r.macro_avg.f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2.0;
  r.macro_avg.support = total;

  r.weighted_avg.support = total;
  if (total > 0) {
    const double w0 = static_cast<double>(r.per_class[0].support) / static_cast<double>(total);
    const double w1 = static_cast<double>(r.per_class[1].support) / static_cast<double>(total);
    r.weighted_avg.precision = w0 * r.per_class[0].precision + w1 * r.per_class[1].precision;
    r.weighted_avg.recall = w0 * r.per_class[0].recall + w1 * r.per_class[1].recall;
    r.weighted_avg.f1 = w0 * r.per_class[0].f1 + w1 * r.per_class[1].f1;
  }

  const double tp = static_cast<double>(cm.tp());
  const double tn = static_cast<double>(cm.tn());
  const double fp = static_cast<double>(cm.fp());
  const double fn = static_cast<double>(cm.fn());
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) {
    r.degenerate.emplace_back("mcc");
    r.mcc = 0.0;
  } else {
    r.mcc = std::clamp((tp * tn - fp * fn) / std::sqrt(den), -1.0, 1.0);
  }

  r.fpr = ratio(cm.fp(), cm.fp() + cm.tn(), "fpr", r.degenerate);
  r.fnr = ratio(cm.fn(), cm.fn() + cm.tp(), "fnr", r.degenerate);

  if (!scores.empty()) {
    if (static_cast<std::int64_t>(scores.size()) != total || true_labels.size() != scores.size()) {
      throw std::invalid_argument("scores must align with the evaluated samples");
    }
    r.auc_roc = auc_roc(true_labels, scores);
  }
  return r;
}

std::vector<RocPoint> roc_curve(std::span<const int> true_labels, std::span<const double> scores) {
  if (true_labels.size() != scores.size()) throw std::invalid_argument("labels and scores differ in length");
  std::int64_t positives = 0;
  for (int t : true_labels) {
    if (t != 0 && t != 1) throw std::invalid_argument("label out of range");
    positives += t;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(true_labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("ROC needs at least one positive and one negative sample");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    // Tied scores move together: one diagonal step per tie group.
    while (k < order.size() && scores[order[k]] == threshold) {
      if (true_labels[order[k]] == 1) ++tp; else ++fp;
      ++k;
    }
    curve.push_back({threshold, static_cast<double>(fp) / negatives, static_cast<double>(tp) / positives});
  }
  return curve;
}

double auc_roc(std::span<const int> true_labels, std::span<const double> scores) {
  const auto curve = roc_curve(true_labels, scores);
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
  }
  return area;
}

std::string roc_to_csv(std::span<const RocPoint> curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve) out += fmt::format("{},{},{}\n", p.threshold, p.fpr, p.tpr);
  return out;
}

double round_half_even(double value, int digits) {
  const double scale = std::pow(10.0, digits);
  const double scaled = value * scale;
  const double floor_v = std::floor(scaled);
  const double frac = scaled - floor_v;
  double rounded;
  if (std::abs(frac - 0.5) < 1e-9) {
    rounded = std::fmod(floor_v, 2.0) == 0.0 ? floor_v : floor_v + 1.0;
  } else {
    rounded = std::round(scaled);
  }
  return rounded / scale;
}

std::string render_report(const EvaluationReport& r) {
  auto rate = [](double v) { return fmt::format("{:.2f}", round_half_even(v, 2)); };
  std::string out;
  out += fmt::format("{:>14}{:>10}{:>10}{:>10}{:>10}\n\n", "", "precision", "recall", "f1-score", "support");
  for (int c = 0; c < 2; ++c) {
    const auto& m = r.per_class[c];
    out += fmt::format("{:>14}{:>10}{:>10}{:>10}{:>10}\n", r.confusion.class_names[c], rate(m.precision),
                       rate(m.recall), rate(m.f1), m.support);
  }
  out += "\n";
  out += fmt::format("{:>14}{:>10}{:>10}{:>10}{:>10}\n", "accuracy", "", "", rate(r.accuracy), r.confusion.total());
  out += fmt::format("{:>14}{:>10}{:>10}{:>10}{:>10}\n", "macro avg", rate(r.macro_avg.precision),
                     rate(r.macro_avg.recall), rate(r.macro_avg.f1), r.macro_avg.support);
  out += fmt::format("{:>14}{:>10}{:>10}{:>10}{:>10}\n", "weighted avg", rate(r.weighted_avg.precision),
                     rate(r.weighted_avg.recall), rate(r.weighted_avg.f1), r.weighted_avg.support);
  out += "\n";
  out += fmt::format("confusion [true x predicted]: TN={} FP={} FN={} TP={}\n", r.confusion.tn(), r.confusion.fp(),
                     r.confusion.fn(), r.confusion.tp());
  out += fmt::format("mcc={:.3f} fpr={:.3f} fnr={:.3f}", r.mcc, r.fpr, r.fnr);
  if (r.auc_roc) out += fmt::format(" auc={:.3f}", *r.auc_roc);
  out += "\n";
  return out;
}

namespace {

nlohmann::ordered_json averages_json(const AverageMetrics& a) {
  return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}, {"support", a.support}};
}

AverageMetrics averages_from_json(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
          j.at("support").get<std::int64_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["confusion"] = {{"class_names", r.confusion.class_names},
                    {"counts", {{r.confusion.tn(), r.confusion.fp()}, {r.confusion.fn(), r.confusion.tp()}}}};
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (int c = 0; c < 2; ++c) {
    const auto& m = r.per_class[c];
    per_class[r.confusion.class_names[c]] = {{"precision", m.precision}, {"recall", m.recall},
                                             {"specificity", m.specificity}, {"f1", m.f1}, {"support", m.support}};
  }
  j["per_class"] = per_class;
  j["accuracy"] = r.accuracy;
  j["macro_avg"] = averages_json(r.macro_avg);
  j["weighted_avg"] = averages_json(r.weighted_avg);
  j["mcc"] = r.mcc;
  j["auc_roc"] = r.auc_roc ? nlohmann::ordered_json(*r.auc_roc) : nlohmann::ordered_json(nullptr);
  j["fpr"] = r.fpr;
  j["fnr"] = r.fnr;
  j["degenerate"] = r.degenerate;
  return j;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  const auto& counts = j.at("confusion").at("counts");
  r.confusion = ConfusionMatrix::from_counts(counts.at(0).at(0).get<std::int64_t>(), counts.at(0).at(1).get<std::int64_t>(),
                                             counts.at(1).at(0).get<std::int64_t>(), counts.at(1).at(1).get<std::int64_t>());
  r.confusion.class_names = j.at("confusion").at("class_names").get<std::array<std::string, 2>>();
  for (int c = 0; c < 2; ++c) {
    const auto& m = j.at("per_class").at(r.confusion.class_names[c]);
    r.per_class[c] = {m.at("precision").get<double>(), m.at("recall").get<double>(), m.at("specificity").get<double>(),
                      m.at("f1").get<double>(), m.at("support").get<std::int64_t>()};
  }
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_avg = averages_from_json(j.at("macro_avg"));
  r.weighted_avg = averages_from_json(j.at("weighted_avg"));
  r.mcc = j.at("mcc").get<double>();
  if (!j.at("auc_roc").is_null()) r.auc_roc = j.at("auc_roc").get<double>();
  r.fpr = j.at("fpr").get<double>();
  r.fnr = j.at("fnr").get<double>();
  r.degenerate = j.value("degenerate", std::vector<std::string>{});
  return r;
}

}  // namespace plasmodium
