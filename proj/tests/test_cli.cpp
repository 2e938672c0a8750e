/* Copyright 2026 The PRF Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(PRF_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Relative path -> file bytes for every regular file under `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "prf_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    const auto r = run("gen-synth --n 4 --seed 3 --verbosity 0 --out " + (root_ / "data").string());
    ASSERT_EQ(r.code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string p(const std::string& rel) { return (root_ / rel).string(); }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, HelpListsEveryFlag) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  std::set<std::string> tokens;
  {
    std::string text = r.out;
    std::replace_if(text.begin(), text.end(), [](char ch) { return ch == ',' || ch == '='; }, ' ');
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) tokens.insert(tok);
  }
  for (const char* flag : {"--n", "--seed", "--out", "--config", "--verbosity", "--threads", "--opt",
                           "--epochs", "--batch-scale", "--alpha", "--tau", "--pred", "--gt",
                           "--classes", "--fovs", "--alphas", "--data", "--seeds", "--help"})
    EXPECT_TRUE(tokens.count(flag)) << flag;
  for (const char* cmd : {"gen-synth", "pretrain", "self-check", "eval-pq", "fov-sweep", "alpha-sweep"})
    EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
  EXPECT_NE(r.out.find("Exit codes"), std::string::npos);
  EXPECT_EQ(run("pretrain --help").code, 0);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("gen-synth --n -1 --out " + p("x")).code, 2);
  EXPECT_EQ(run("gen-synth --bogus").code, 2);
  EXPECT_EQ(run("pretrain --data " + p("data") + " --opt adam --out " + p("x")).code, 2);
  EXPECT_EQ(run("eval-pq --gt " + p("data")).code, 2);
  EXPECT_EQ(run("gen-synth --threads 0").code, 2);
  {
    std::ofstream(p("bad.json")) << R"({"n": 2, "colour": "red"})";
  }
  EXPECT_EQ(run("gen-synth --config " + p("bad.json") + " --out " + p("x")).code, 2);
}

TEST_F(Cli, DataErrorsExitThreeAndNameOffender) {
  fs::create_directories(root_ / "partial");
  fs::copy_file(root_ / "data" / "000.pgm", root_ / "partial" / "000.pgm");
  const std::string cmd = std::string(PRF_CLI_PATH) + " eval-pq --pred " + p("partial") + " --gt " +
                          p("data") + " --out " + p("e") + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
  const int status = pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 3);
  EXPECT_NE(text.find("001.pgm"), std::string::npos) << text;
  EXPECT_EQ(run("pretrain --data " + p("nowhere") + " --out " + p("x")).code, 3);
}

TEST_F(Cli, GenSynthCountsAndEmpty) {
  const auto r = run("gen-synth --n 2 --seed 7 --verbosity 0 --out " + p("g2"));
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(snapshot(root_ / "g2").size(), 5u);
  ASSERT_EQ(run("gen-synth --n 0 --out " + p("g0")).code, 0);
  const auto meta = nlohmann::json::parse(slurp(root_ / "g0" / "meta.json"));
  EXPECT_EQ(meta.at("count"), 0);
  EXPECT_TRUE(meta.at("files").empty());
  EXPECT_EQ(snapshot(root_ / "g0").size(), 1u);
}

TEST_F(Cli, EvalPqPerfectAndTableRows) {
  ASSERT_EQ(run("eval-pq --pred " + p("data") + " --gt " + p("data") + " --out " + p("ev")).code, 0);
  const auto rep = nlohmann::json::parse(slurp(root_ / "ev" / "report.json"));
  EXPECT_EQ(rep.at("pq_all"), 1.0);
  EXPECT_EQ(rep.at("pq_stuff"), 1.0);
  EXPECT_EQ(rep.at("pq_things"), 1.0);
  const auto csv = slurp(root_ / "ev" / "report.csv");
  EXPECT_NE(csv.find("\nstuff,"), std::string::npos);
  EXPECT_NE(csv.find("\nthings,"), std::string::npos);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Cli, FovSweepCsvRoundTrip) {
  ASSERT_EQ(run("fov-sweep --pred " + p("data") + " --gt " + p("data") + " --out " + p("fov")).code, 0);
  const auto rows = parse_csv(slurp(root_ / "fov" / "fov_sweep.csv"));
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"fov_deg", "pq", "pq_stuff", "pq_things"}));
  const std::vector<double> grid = {140, 170, 205, 237, 271, 304, 338};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(std::stod(rows[k + 1][0]), grid[k]);
    EXPECT_EQ(std::stod(rows[k + 1][1]), 1.0);
  }
  ASSERT_EQ(run("fov-sweep --pred " + p("data") + " --gt " + p("data") + " --fovs 90,360 --out " +
                p("fov2"))
                .code,
            0);
  EXPECT_EQ(parse_csv(slurp(root_ / "fov2" / "fov_sweep.csv")).size(), 3u);
}

TEST_F(Cli, AlphaSweepCsvRoundTrip) {
  ASSERT_EQ(run("alpha-sweep --data " + p("data") + " --out " + p("al")).code, 0);
  const auto rows = parse_csv(slurp(root_ / "al" / "alpha_sweep.csv"));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"alpha", "l_spatial", "l_glopro", "l_total"}));
  const std::vector<double> grid = {0.25, 0.5, 1, 2, 3, 4};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& r = rows[k + 1];
    ASSERT_EQ(r.size(), 4u);
    EXPECT_EQ(std::stod(r[0]), grid[k]);
    EXPECT_NEAR(std::stod(r[3]), std::stod(r[1]) + grid[k] * std::stod(r[2]), 1e-12);
  }
}

TEST_F(Cli, PretrainSgdThreeEpochsUnderAMinute) {
  ASSERT_EQ(run("gen-synth --n 8 --verbosity 0 --out " + p("d8")).code, 0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run("pretrain --data " + p("d8") + " --opt sgd --epochs 3 --out " + p("sgd3"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(r.code, 0);
  EXPECT_LT(secs, 60.0);
  const auto rows = parse_csv(slurp(root_ / "sgd3" / "loss.csv"));
  // 8 images at batch 4 for 3 epochs.
  EXPECT_EQ(rows.size(), 1u + 6u);
  EXPECT_TRUE(fs::exists(root_ / "sgd3" / "checkpoint.prf"));
}

TEST_F(Cli, AlphaZeroKeepsGloproColumn) {
  ASSERT_EQ(run("pretrain --data " + p("data") + " --alpha 0 --epochs 1 --out " + p("a0")).code, 0);
  const auto rows = parse_csv(slurp(root_ / "a0" / "loss.csv"));
  ASSERT_GE(rows.size(), 2u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k][5], rows[k][3]);
    EXPECT_NE(std::stod(rows[k][4]), 0.0);
  }
}

TEST_F(Cli, LarsLargeRecordedInHeader) {
  ASSERT_EQ(run("pretrain --data " + p("data") + " --opt lars --batch-scale 2 --epochs 1 --out " +
                p("large"))
                .code,
            0);
  const auto bytes = slurp(root_ / "large" / "checkpoint.prf");
  ASSERT_GT(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 7), "PRFCKPT");
  std::uint64_t len = 0;
  for (int k = 0; k < 8; ++k) len |= std::uint64_t(static_cast<unsigned char>(bytes[12 + k])) << (8 * k);
  const auto header = nlohmann::json::parse(bytes.substr(20, len));
  EXPECT_EQ(header.at("batch_scale"), 2);
  EXPECT_EQ(header.at("optimizer").at("kind"), "lars");
}

TEST_F(Cli, PrintConfigShowsEffectiveSettings) {
  const auto r = run("pretrain --print-config --opt sgd --tau 0.2");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("tau"), 0.2);
  EXPECT_EQ(j.at("optimizer").at("kind"), "sgd");
}

TEST_F(Cli, EverySubcommandDeterministic) {
  const std::map<std::string, std::string> cmds = {
      {"gen-synth", "gen-synth --n 3 --seed 11"},
      {"pretrain", "pretrain --data " + p("data") + " --epochs 2 --seed 5"},
      {"self-check", "self-check --seeds 3 --seed 2"},
      {"eval-pq", "eval-pq --pred " + p("data") + " --gt " + p("data")},
      {"fov-sweep", "fov-sweep --pred " + p("data") + " --gt " + p("data")},
      {"alpha-sweep", "alpha-sweep --data " + p("data") + " --steps 2 --seed 4"},
  };
  for (const auto& [name, args] : cmds) {
    const auto a = run(args + " --threads 1 --out " + p("det_a/" + name));
    const auto b = run(args + " --threads 1 --out " + p("det_b/" + name));
    ASSERT_EQ(a.code, 0) << name;
    ASSERT_EQ(b.code, 0) << name;
    const auto sa = snapshot(root_ / "det_a" / name);
    const auto sb = snapshot(root_ / "det_b" / name);
    EXPECT_FALSE(sa.empty()) << name;
    EXPECT_EQ(sa, sb) << name;
  }
}

}  // namespace
