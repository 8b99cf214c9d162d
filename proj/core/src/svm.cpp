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

#include "plasmodium/svm.hpp"

#include <cblas.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "plasmodium/error.hpp"

namespace plasmodium {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'S', 'V', 'M', '1', '\0', '\0'};
constexpr double kTau = 1e-12;
constexpr std::size_t kDistanceMatrixBudget = std::size_t{64} << 20;  // floats

std::vector<float> squared_norms(const FeatureMatrix& x) {
  std::vector<float> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    out[i] = cblas_sdot(static_cast<int>(x.cols), r.data(), 1, r.data(), 1);
  }
  return out;
}

// Squared Euclidean distances between rows of one feature matrix, either
// from a precomputed table or on demand.
class Distances {
 public:
  Distances(const FeatureMatrix& x, bool precompute) : x_(x), norms_(squared_norms(x)) {
    if (!precompute || x.rows * x.rows > kDistanceMatrixBudget) return;
    const std::size_t n = x.rows;
    table_.resize(n * n);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(n), static_cast<int>(n),
                static_cast<int>(x.cols), 1.0f, x.values.data(), static_cast<int>(x.cols), x.values.data(),
                static_cast<int>(x.cols), 0.0f, table_.data(), static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        float& v = table_[i * n + j];
        v = i == j ? 0.0f : std::max(0.0f, norms_[i] + norms_[j] - 2.0f * v);
      }
    }
  }

  /// Distances from row `i` to every row in `targets`.
  void row(std::size_t i, std::span<const std::size_t> targets, float* out) const {
    if (!table_.empty()) {
      const float* t = table_.data() + i * x_.rows;
      for (std::size_t k = 0; k < targets.size(); ++k) out[k] = t[targets[k]];
      return;
    }
    const auto xi = x_.row(i);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const std::size_t j = targets[k];
      const float dot = cblas_sdot(static_cast<int>(x_.cols), xi.data(), 1, x_.row(j).data(), 1);
      out[k] = j == i ? 0.0f : std::max(0.0f, norms_[i] + norms_[j] - 2.0f * dot);
    }
  }

  /// Distances from row `i` to all rows.
  void full_row(std::size_t i, float* out) const {
    if (!table_.empty()) {
      std::copy_n(table_.data() + i * x_.rows, x_.rows, out);
      return;
    }
    cblas_sgemv(CblasRowMajor, CblasNoTrans, static_cast<int>(x_.rows), static_cast<int>(x_.cols), 1.0f,
                x_.values.data(), static_cast<int>(x_.cols), x_.row(i).data(), 1, 0.0f, out, 1);
    for (std::size_t j = 0; j < x_.rows; ++j) {
      out[j] = j == i ? 0.0f : std::max(0.0f, norms_[i] + norms_[j] - 2.0f * out[j]);
    }
  }

 private:
  const FeatureMatrix& x_;
  std::vector<float> norms_;
  std::vector<float> table_;
};

// Least-recently-used cache of kernel rows.
class RowCache {
 public:
  RowCache(std::size_t n, std::size_t bytes, std::function<void(std::size_t, float*)> fill)
      : n_(n), capacity_(std::max<std::size_t>(2, bytes / std::max<std::size_t>(1, n * sizeof(float)))),
        fill_(std::move(fill)) {}

  const float* get(std::size_t i) {
    if (auto it = index_.find(i); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second.data();
    }
    if (order_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(i, std::vector<float>(n_));
    fill_(i, order_.front().second.data());
    index_[i] = order_.begin();
    return order_.front().second.data();
  }

 private:
  using Entry = std::pair<std::size_t, std::vector<float>>;
  std::size_t n_, capacity_;
  std::function<void(std::size_t, float*)> fill_;
  std::list<Entry> order_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

struct DualSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  std::int64_t iterations = 0;
};

// Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j K_ij
// and K_ii = 1.
DualSolution solve_smo(std::span<const int> y, double c, std::function<void(std::size_t, float*)> kernel_row,
                       const SvmOptions& options) {
  const std::size_t n = y.size();
  RowCache cache(n, options.cache_bytes, std::move(kernel_row));
  DualSolution s;
  s.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto& alpha = s.alpha;
  const auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  const auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  for (; s.iterations < options.max_iterations; ++s.iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = static_cast<std::ptrdiff_t>(t);
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t], i = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (i < 0) break;
    const float* ki = cache.get(i);
    double gmax2 = -std::numeric_limits<double>::infinity(), best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      double diff;
      if (y[t] == 1) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, grad[t]);
        diff = gmax + grad[t];
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -grad[t]);
        diff = gmax - grad[t];
      }
      if (diff > 0.0) {
        double quad = 2.0 - 2.0 * ki[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best) best = obj, j = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gmax + gmax2 < options.tolerance || j < 0) break;

    const float* kj = cache.get(j);
    ki = cache.get(i);
    const double yi = y[i], yj = y[j];
    const double qij = yi * yj * ki[j];
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else if (alpha[j] > c) {
        alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0, alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  s.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  return s;
}

// Signs in {+1, -1} oriented so the first sample is +1; returns the
// orientation. Solving in this canonical orientation makes a global label
// swap flip every decision score exactly.
int canonical_signs(std::span<const int> labels, std::vector<int>& y) {
  const int orientation = labels.front() == 1 ? 1 : -1;
  y.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = (labels[i] == 1 ? 1 : -1) * orientation;
  return orientation;
}

void require_two_classes(std::span<const int> labels) {
  const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
  const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (!has0 || !has1) throw ConfigError("SVM training data must contain both classes");
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

FeatureVector featurize(const Image& image, const PreprocessProfile& profile) {
  return standardize(image, profile).data;
}

void FeatureMatrix::append(std::span<const float> features, int label) {
  if (rows == 0 && cols == 0) cols = features.size();
  if (features.size() != cols) throw ShapeError("feature length " + std::to_string(features.size()) + " != " + std::to_string(cols));
  values.insert(values.end(), features.begin(), features.end());
  labels.push_back(label);
  ++rows;
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> members) const {
  FeatureMatrix out;
  out.cols = cols;
  out.values.reserve(members.size() * cols);
  for (std::size_t m : members) out.append(row(m), labels[m]);
  return out;
}

FeatureMatrix featurize_all(std::span<const LabeledImage> corpus, std::span<const std::size_t> members,
                            const PreprocessProfile& profile) {
  FeatureMatrix out;
  out.cols = static_cast<std::size_t>(profile.target_size.height) * profile.target_size.width * 3;
  out.values.reserve(members.size() * out.cols);
  for (std::size_t m : members) out.append(featurize(corpus[m].pixels, profile), class_index(corpus[m].label));
  return out;
}

void SvmHyperParams::validate() const {
  if (!(C > 0.0) || !(gamma > 0.0)) throw ConfigError("SVM C and gamma must be positive");
}

SvmModel train_svm(const FeatureMatrix& train, const SvmHyperParams& params, const SvmOptions& options) {
  params.validate();
  if (train.rows == 0) throw ConfigError("SVM training set is empty");
  require_two_classes(train.labels);
  std::vector<int> y;
  const int orientation = canonical_signs(train.labels, y);
  const Distances dist(train, false);
  const auto gamma = static_cast<float>(params.gamma);
  auto solution = solve_smo(
      y, params.C,
      [&](std::size_t i, float* out) {
        dist.full_row(i, out);
        for (std::size_t k = 0; k < train.rows; ++k) out[k] = std::exp(-gamma * out[k]);
      },
      options);

  SvmModel model;
  model.params = params;
  model.dim = train.cols;
  model.rho = orientation * solution.rho;
  model.iterations = solution.iterations;
  for (std::size_t i = 0; i < train.rows; ++i) {
    if (solution.alpha[i] <= 0.0) continue;
    model.coefficients.push_back(solution.alpha[i] * y[i] * orientation);
    const auto r = train.row(i);
    model.support_vectors.insert(model.support_vectors.end(), r.begin(), r.end());
  }
  return model;
}

std::vector<double> decision_scores(const SvmModel& model, const FeatureMatrix& features) {
  if (features.rows > 0 && features.cols != model.dim) {
    throw ShapeError("feature length " + std::to_string(features.cols) + " does not match the model's " +
                     std::to_string(model.dim));
  }
  const std::size_t m = features.rows, s = model.support_count(), d = model.dim;
  std::vector<double> scores(m, -model.rho);
  if (m == 0 || s == 0) return scores;
  std::vector<float> sv_norms(s);
  for (std::size_t k = 0; k < s; ++k) {
    const float* v = model.support_vectors.data() + k * d;
    sv_norms[k] = cblas_sdot(static_cast<int>(d), v, 1, v, 1);
  }
  const auto x_norms = squared_norms(features);
  const std::size_t step = std::max<std::size_t>(1, (std::size_t{1} << 22) / s);
  std::vector<float> dots(std::min(m, step) * s);
  for (std::size_t r0 = 0; r0 < m; r0 += step) {
    const std::size_t r1 = std::min(m, r0 + step);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(r1 - r0), static_cast<int>(s),
                static_cast<int>(d), 1.0f, features.values.data() + r0 * d, static_cast<int>(d),
                model.support_vectors.data(), static_cast<int>(d), 0.0f, dots.data(), static_cast<int>(s));
    for (std::size_t r = r0; r < r1; ++r) {
      const float* row = dots.data() + (r - r0) * s;
      double acc = 0.0;
      for (std::size_t k = 0; k < s; ++k) {
        const double d2 = std::max(0.0, static_cast<double>(x_norms[r]) + sv_norms[k] - 2.0 * row[k]);
        acc += model.coefficients[k] * std::exp(-model.params.gamma * d2);
      }
      scores[r] += acc;
    }
  }
  return scores;
}

SvmPrediction predict_svm(const SvmModel& model, std::span<const float> features) {
  if (features.size() != model.dim) {
    throw ShapeError("feature length " + std::to_string(features.size()) + " does not match the model's " +
                     std::to_string(model.dim));
  }
  FeatureMatrix one;
  one.append(features, 0);
  const double score = decision_scores(model, one).front();
  return {label_for_score(score), score};
}

std::string GridSearchResult::to_csv() const {
  std::string out = "C,gamma,fold_mean_accuracy\n";
  for (const auto& cell : scores) out += fmt::format("{},{},{:.6f}\n", cell.C, cell.gamma, cell.mean_accuracy);
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<int> assignment(labels.size(), -1);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(folds)) {
      throw ConfigError(fmt::format("class {} has {} samples, fewer than {} folds", cls, members.size(), folds));
    }
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(cls));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) assignment[members[k]] = static_cast<int>(k % folds);
  }
  return assignment;
}

GridSearchResult grid_search(const FeatureMatrix& train, std::span<const double> c_values,
                             std::span<const double> gamma_values, int folds, std::uint64_t seed,
                             const SvmOptions& options) {
  if (c_values.empty() || gamma_values.empty()) throw ConfigError("grid search needs a non-empty grid");
  require_two_classes(train.labels);
  std::vector<double> cs(c_values.begin(), c_values.end()), gammas(gamma_values.begin(), gamma_values.end());
  std::sort(cs.begin(), cs.end());
  std::sort(gammas.begin(), gammas.end());
  for (double c : cs) SvmHyperParams{c, 1.0}.validate();
  for (double g : gammas) SvmHyperParams{1.0, g}.validate();

  const auto assignment = stratified_folds(train.labels, folds, seed);
  const Distances dist(train, true);
  std::vector<std::vector<std::size_t>> fit_rows(folds), held_rows(folds);
  for (std::size_t i = 0; i < train.rows; ++i) {
    for (int f = 0; f < folds; ++f) (assignment[i] == f ? held_rows : fit_rows)[f].push_back(i);
  }

  GridSearchResult result;
  result.folds = folds;
  for (double c : cs) {
    for (double g : gammas) {
      GridCell cell{c, g, 0.0, {}};
      const auto gamma = static_cast<float>(g);
      for (int f = 0; f < folds; ++f) {
        const auto& rows = fit_rows[f];
        std::vector<int> labels;
        for (std::size_t r : rows) labels.push_back(train.labels[r]);
        std::vector<int> y;
        const int orientation = canonical_signs(labels, y);
        const auto sol = solve_smo(
            y, c,
            [&](std::size_t i, float* out) {
              dist.row(rows[i], rows, out);
              for (std::size_t k = 0; k < rows.size(); ++k) out[k] = std::exp(-gamma * out[k]);
            },
            options);
        std::vector<std::size_t> support;
        std::vector<double> coef;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (sol.alpha[i] > 0.0) {
            support.push_back(rows[i]);
            coef.push_back(sol.alpha[i] * y[i] * orientation);
          }
        }
        std::size_t correct = 0;
        std::vector<float> d2(support.size());
        for (std::size_t h : held_rows[f]) {
          dist.row(h, support, d2.data());
          double score = -orientation * sol.rho;
          for (std::size_t k = 0; k < support.size(); ++k) score += coef[k] * std::exp(-g * d2[k]);
          correct += class_index(label_for_score(score)) == train.labels[h];
        }
        cell.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(held_rows[f].size()));
      }
      cell.mean_accuracy = std::accumulate(cell.fold_accuracy.begin(), cell.fold_accuracy.end(), 0.0) / folds;
      if (result.scores.empty() || cell.mean_accuracy > result.best_accuracy) {
        result.best = {c, g};
        result.best_accuracy = cell.mean_accuracy;
      }
      result.scores.push_back(std::move(cell));
    }
  }
  return result;
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["kernel"] = "rbf";
  header["C"] = model.params.C;
  header["gamma"] = model.params.gamma;
  header["dim"] = model.dim;
  header["support_count"] = model.support_count();
  header["rho"] = model.rho;
  header["iterations"] = model.iterations;
  header["labels"] = {kClassNames[0], kClassNames[1]};
  header["feature_profile"] = to_json(model.profile);
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(model.coefficients.data()),
            static_cast<std::streamsize>(model.coefficients.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.support_vectors.data()),
            static_cast<std::streamsize>(model.support_vectors.size() * sizeof(float)));
  if (!out) throw DataError("failed writing " + path.string());
}

SvmModel load_svm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError(path.string() + " is not an SVM model");
  const auto length = read_pod<std::uint64_t>(in);
  if (!in || length > (std::uint64_t{1} << 26)) throw DataError(path.string() + ": corrupt header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  const auto header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded()) throw DataError(path.string() + ": corrupt header");
  SvmModel model;
  model.params = {header.at("C").get<double>(), header.at("gamma").get<double>()};
  model.dim = header.at("dim").get<std::size_t>();
  model.rho = header.at("rho").get<double>();
  model.iterations = header.value("iterations", std::int64_t{0});
  model.profile = profile_from_json(header.at("feature_profile"));
  const auto count = header.at("support_count").get<std::size_t>();
  model.coefficients.resize(count);
  model.support_vectors.resize(count * model.dim);
  in.read(reinterpret_cast<char*>(model.coefficients.data()), static_cast<std::streamsize>(count * sizeof(double)));
  in.read(reinterpret_cast<char*>(model.support_vectors.data()),
          static_cast<std::streamsize>(model.support_vectors.size() * sizeof(float)));
  if (!in) throw DataError(path.string() + ": truncated model");
  return model;
}

}  // namespace plasmodium
