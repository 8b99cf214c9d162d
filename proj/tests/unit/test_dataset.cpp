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

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <vector>

#include <fmt/format.h>

#include "plasmodium/dataset.hpp"
#include "plasmodium/error.hpp"
#include "plasmodium/png_io.hpp"
#include "properties.hpp"
#include "synthetic.hpp"

namespace plasmodium {
namespace {

using testing::TempDir;

std::vector<LabeledImage> labels_only(std::size_t n0, std::size_t n1) {
  std::vector<LabeledImage> corpus;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    const auto label = i < n0 ? ClassLabel::Uninfected : ClassLabel::Parasitized;
    corpus.push_back({Image(1, 1), label, fmt::format("{}/c{:06d}.png", kClassDirectories[class_index(label)], i)});
  }
  std::sort(corpus.begin(), corpus.end(), [](const auto& a, const auto& b) { return a.source_path < b.source_path; });
  return corpus;
}

TEST(Ingest, ReadsBothClassesSortedWithLabelsFromDirectories) {
  TempDir dir;
  const auto corpus = testing::synthetic_corpus(5, 1, 20, 30);
  testing::write_corpus(dir.path(), corpus);
  const auto loaded = ingest_corpus(dir.path());
  ASSERT_EQ(loaded.images.size(), 10u);
  EXPECT_EQ(loaded.summary.per_class[0], 5u);
  EXPECT_EQ(loaded.summary.per_class[1], 5u);
  for (std::size_t i = 0; i < loaded.images.size(); ++i) {
    const auto& img = loaded.images[i];
    if (i > 0) {
      EXPECT_LT(loaded.images[i - 1].source_path, img.source_path);
    }
    const bool parasitized_dir = img.source_path.starts_with("Parasitized/");
    EXPECT_EQ(img.label == ClassLabel::Parasitized, parasitized_dir) << img.source_path;
    EXPECT_EQ(img.pixels.pixels, corpus[i].pixels.pixels);
  }
}

TEST(Ingest, DirectoryNamesMatchCaseInsensitively) {
  TempDir dir;
  std::filesystem::create_directories(dir / "parasitized");
  std::filesystem::create_directories(dir / "UNINFECTED");
  write_png(dir / "parasitized/a.png", Image(4, 4, 10));
  write_png(dir / "UNINFECTED/b.png", Image(4, 4, 20));
  const auto loaded = ingest_corpus(dir.path());
  ASSERT_EQ(loaded.images.size(), 2u);
  EXPECT_EQ(loaded.summary.per_class[0], 1u);
  EXPECT_EQ(loaded.summary.per_class[1], 1u);
}

TEST(Ingest, SkipsUndecodableFilesAndCountsThem) {
  TempDir dir;
  testing::write_corpus(dir.path(), testing::synthetic_corpus(2, 2, 16, 16));
  std::ofstream(dir / "Parasitized/broken.png") << "not a png";
  const auto loaded = ingest_corpus(dir.path());
  EXPECT_EQ(loaded.images.size(), 4u);
  EXPECT_EQ(loaded.summary.skipped, 1u);
}

TEST(Ingest, LimitPerClassKeepsLexicographicallyFirstFiles) {
  TempDir dir;
  testing::write_corpus(dir.path(), testing::synthetic_corpus(6, 3, 16, 16));
  const auto loaded = ingest_corpus(dir.path(), 2);
  ASSERT_EQ(loaded.images.size(), 4u);
  EXPECT_EQ(loaded.images[0].source_path, "Parasitized/cell_00000.png");
  EXPECT_EQ(loaded.images[1].source_path, "Parasitized/cell_00001.png");
}

TEST(Ingest, MissingClassDirectoryIsAConfigError) {
  TempDir dir;
  std::filesystem::create_directories(dir / "Parasitized");
  EXPECT_THROW(ingest_corpus(dir.path()), ConfigError);
  EXPECT_THROW(ingest_corpus(dir / "nope"), ConfigError);
}

TEST(SplitSizes, TransferSchemeOnTheFullCorpus) {
  const auto s = split_sizes(SplitScheme::Transfer, 27558, 13779);
  EXPECT_EQ(2 * s.train, 16000u);
  EXPECT_EQ(2 * s.validation, 6000u);
  EXPECT_EQ(s.test, 5558u);
  EXPECT_FALSE(s.fractional_fallback);
}

TEST(SplitSizes, CnnSchemeOnTheSectionCorpus) {
  const auto s = split_sizes(SplitScheme::Cnn, 27358, 13679);
  EXPECT_EQ(s.train, 23254u);
  EXPECT_EQ(s.validation, 2052u);
  EXPECT_EQ(s.test, 2052u);
}

TEST(SplitSizes, SvmSchemeFloorsAndGivesTheRemainderToTest) {
  const auto s = split_sizes(SplitScheme::Svm, 10, 5);
  EXPECT_EQ(s.train, 7u);
  EXPECT_EQ(s.validation, 1u);
  EXPECT_EQ(s.test, 2u);
}

TEST(Split, TransferFallsBackToFractionsWithAWarning) {
  const auto corpus = labels_only(300, 300);
  const auto s = make_split(corpus, SplitScheme::Transfer, 1);
  EXPECT_FALSE(s.warnings.empty());
  EXPECT_EQ(s.size(), corpus.size());
}

TEST(Split, TransferRejectsImbalanceItCannotDraw) {
  const auto corpus = labels_only(14000, 100);
  EXPECT_THROW(make_split(corpus, SplitScheme::Transfer, 1), ConfigError);
}

TEST(Split, DifferentSeedsGiveDifferentMembership) {
  const auto corpus = labels_only(500, 500);
  for (auto scheme : {SplitScheme::Svm, SplitScheme::Cnn, SplitScheme::Transfer}) {
    auto a = make_split(corpus, scheme, 1).train, b = make_split(corpus, scheme, 2).train;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_NE(a, b) << to_string(scheme);
  }
}

TEST(Split, ManifestRoundTripsThroughPaths) {
  const auto corpus = labels_only(20, 20);
  const auto s = make_split(corpus, SplitScheme::Cnn, 5);
  const auto j = split_to_json(s, corpus);
  EXPECT_EQ(j.at("scheme"), "cnn");
  EXPECT_EQ(j.at("seed"), 5);
  const auto back = split_from_json(j, corpus);
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.validation, s.validation);
  EXPECT_EQ(back.test, s.test);
  auto bad = j;
  bad["test"].push_back("Parasitized/missing.png");
  EXPECT_THROW(split_from_json(bad, corpus), DataError);
}

TEST(Split, BalancedSubsetIsBalancedSortedAndDeterministic) {
  const auto corpus = labels_only(300, 200);
  const auto a = balanced_subset(corpus, 100, 3);
  EXPECT_EQ(a, balanced_subset(corpus, 100, 3));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  const auto counts = class_counts(corpus, a);
  EXPECT_EQ(counts[0], 50u);
  EXPECT_EQ(counts[1], 50u);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
}

TEST(SplitProperties, Partition) {
  const auto r = testing::split_partition(21);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(SplitProperties, Determinism) {
  const auto r = testing::split_determinism(22);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

TEST(SplitProperties, TransferBalance) {
  const auto r = testing::split_balance(23);
  EXPECT_TRUE(r.passed()) << r.counterexample;
}

}  // namespace
}  // namespace plasmodium
