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
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "plasmodium/dataset.hpp"
#include "plasmodium/run.hpp"
#include "synthetic.hpp"

namespace plasmodium {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr
};

Outcome run_cli(const std::string& args, const std::string& env = "PLASMODIUM_DATA_DIR=") {
#ifndef PLASMODIUM_CLI
  (void)args;
  (void)env;
  return {};
#else
  const std::string command = "env " + env + " '" PLASMODIUM_CLI "' " + args + " 2>&1";
  Outcome out;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out.output += buf.data();
  const int status = pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
#endif
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
#ifndef PLASMODIUM_CLI
    GTEST_SKIP() << "command-line tool not built";
#endif
  }
  std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }
};

TEST_F(Cli, UnknownFlagIsAUsageError) {
  const auto r = run_cli("split --bogus");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_EQ(run_cli("no-such-command").code, 2);
}

TEST_F(Cli, MissingCorpusPointsAtTheDownload) {
  testing::TempDir dir;
  const auto r = run_cli("split --data-dir " + q(dir / "absent"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(kCorpusCitationUrl), std::string::npos) << r.output;
  const auto none = run_cli("ingest");
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.output.find(kCorpusCitationUrl), std::string::npos) << none.output;
}

TEST_F(Cli, SplitIsDeterministic) {
  testing::TempDir dir;
  testing::write_corpus(dir / "data", testing::synthetic_corpus(10, 5, 16, 20));
  const auto data = " --data-dir " + q(dir / "data");
  ASSERT_EQ(run_cli("split --scheme cnn --seed 4 --out " + q(dir / "a.json") + data).code, 0);
  ASSERT_EQ(run_cli("split --scheme cnn --seed 4 --out " + q(dir / "b.json") + data).code, 0);
  ASSERT_EQ(run_cli("split --scheme cnn --seed 5 --out " + q(dir / "c.json") + data).code, 0);
  const auto a = read_text_file(dir / "a.json");
  EXPECT_EQ(a, read_text_file(dir / "b.json"));
  EXPECT_NE(a, read_text_file(dir / "c.json"));
  const auto stdout_split = run_cli("split --scheme cnn --seed 4" + data);
  EXPECT_EQ(stdout_split.output, a);
  const auto j = testing::read_json(dir / "a.json");
  EXPECT_EQ(j.at("train").size() + j.at("validation").size() + j.at("test").size(), 20u);
}

TEST_F(Cli, DataDirectoryCanComeFromTheEnvironment) {
  testing::TempDir dir;
  testing::write_corpus(dir / "data", testing::synthetic_corpus(3, 6, 16, 16));
  const auto r = run_cli("ingest", "PLASMODIUM_DATA_DIR=" + q(dir / "data"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("images 6"), std::string::npos) << r.output;
}

TEST_F(Cli, TrainEvaluateAndCompareSvm) {
  testing::TempDir dir;
  testing::write_corpus(dir / "data", testing::synthetic_corpus(20, 8, 24, 32));
  const auto common = " --data-dir " + q(dir / "data") + " --runs-dir " + q(dir / "runs");
  const auto train = run_cli("train-svm --no-grid --C 10 --gamma 0.01 --seed 3" + common);
  ASSERT_EQ(train.code, 0) << train.output;
  const auto run = dir / "runs" / "svm-s3";
  EXPECT_TRUE(fs::exists(run / kManifestFile));
  const auto eval = run_cli("evaluate --run " + q(run) + " --out " + q(dir / "eval") + common);
  ASSERT_EQ(eval.code, 0) << eval.output;
  EXPECT_EQ(read_text_file(dir / "eval" / kReportJsonFile), read_text_file(run / kReportJsonFile));
  const auto cmp = run_cli("report --compare --runs-dir " + q(dir / "runs"));
  ASSERT_EQ(cmp.code, 0) << cmp.output;
  EXPECT_NE(cmp.output.find("SVM"), std::string::npos);
}

TEST_F(Cli, CompareOverTwelveManifestsGivesTwelveRows) {
  testing::TempDir dir;
  int k = 0;
  for (const auto& key : model_matrix()) {
    RunManifest m;
    m.model = key;
    m.run_id = key.id() + "-s0";
    m.scheme = key.split_scheme();
    m.profile = key.profile();
    const auto rep = report(ConfusionMatrix::from_counts(50 + k, 10, 5 + k, 60));
    m.metrics = rep;
    write_run(dir / m.run_id, m, std::nullopt, rep);
    ++k;
  }
  const auto r = run_cli("report --compare --runs-dir " + q(dir.path()) + " --json " + q(dir / "table.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(r.output);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) lines += !line.empty();
  EXPECT_EQ(lines, 13) << r.output;
  EXPECT_EQ(testing::read_json(dir / "table.json").size(), 12u);
  EXPECT_EQ(run_cli("report --compare --runs-dir " + q(dir / "empty")).code, 1);
}

}  // namespace
}  // namespace plasmodium
