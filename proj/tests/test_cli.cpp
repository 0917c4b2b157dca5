// Copyright 2026 The med2vec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "med2vec/cli.hpp"
#include "med2vec/pipeline.hpp"

namespace med2vec {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "med2vec");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path workdir() {
  const auto dir = fs::path(::testing::TempDir()) / "med2vec_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> synth_args(const fs::path &out) {
  return {"synth", "--seed", "7", "--out", out.string(), "--patients", "120", "--codes", "60", "--groups", "6"};
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--corpus", "x", "--out", "y", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"eval", "--checkpoint", "a", "--corpus", "b", "--task", "magic"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  const auto r = cli({"train", "--corpus", (workdir() / "missing.txt").string(), "--out", "m.m2v"});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("missing.txt"), std::string::npos);
}

TEST(Cli, SynthIsDeterministic) {
  const auto a = workdir() / "synth_a", b = workdir() / "synth_b";
  ASSERT_EQ(cli(synth_args(a)).code, kExitOk);
  ASSERT_EQ(cli(synth_args(b)).code, kExitOk);
  for (const char *f : {"visits.txt", "demo.txt", "labels.txt", "grouper.tsv", "train_visits.txt", "test_visits.txt"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "synth");
  EXPECT_EQ(manifest["flags"]["--seed"], "7");
  EXPECT_TRUE(manifest["seeds"].contains("corpus"));
}

TEST(Cli, TrainEvalInterpretRoundTrip) {
  const auto d = workdir() / "flow";
  ASSERT_EQ(cli(synth_args(d)).code, kExitOk);
  const auto visits_before = slurp(d / "train_visits.txt");
  const auto ckpt = (d / "model.m2v").string();
  auto r = cli({"train", "--corpus", (d / "train_visits.txt").string(), "--demo", (d / "train_demo.txt").string(),
                "--grouper", (d / "grouper.tsv").string(), "--m", "8", "--n", "8", "--epochs", "2",
                "--batch-size", "100", "--out", ckpt, "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(d / "train_visits.txt"), visits_before);
  EXPECT_TRUE(fs::exists(ckpt + ".log.csv"));
  const auto manifest = nlohmann::json::parse(slurp(ckpt + ".manifest.json"));
  EXPECT_EQ(manifest["inputs"].size(), 3u);
  EXPECT_EQ(manifest["extra"]["targets"], "grouped");

  r = cli({"eval", "--checkpoint", ckpt, "--corpus", (d / "test_visits.txt").string(), "--grouper",
           (d / "grouper.tsv").string(), "--task", "nmi", "--out", (d / "nmi.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("nmi"), std::string::npos);
  EXPECT_EQ(slurp(d / "nmi.csv").rfind("metric,value,config\nnmi,", 0), 0u);
  EXPECT_TRUE(fs::exists(d / "nmi.csv.manifest.json"));

  r = cli({"eval", "--checkpoint", ckpt, "--corpus", (d / "test_visits.txt").string(), "--task", "auc"});
  EXPECT_EQ(r.code, kExitUsage) << "auc without labels";

  r = cli({"eval", "--checkpoint", ckpt, "--corpus", (d / "test_visits.txt").string(), "--demo",
           (d / "test_demo.txt").string(), "--labels", (d / "test_labels.txt").string(), "--task", "auc",
           "--lr-out", (d / "lr.txt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;

  for (const auto &mode : {std::vector<std::string>{"--mode", "code-coord", "--coord", "1"},
                           std::vector<std::string>{"--mode", "visit-coord", "--coord", "2"},
                           std::vector<std::string>{"--mode", "influence", "--lr-weights", (d / "lr.txt").string()}}) {
    std::vector<std::string> args = {"interpret", "--checkpoint", ckpt, "--k", "4"};
    args.insert(args.end(), mode.begin(), mode.end());
    auto first = args, second = args;
    first.insert(first.end(), {"--out", (d / "i1.txt").string()});
    second.insert(second.end(), {"--out", (d / "i2.txt").string()});
    const auto r1 = cli(first), r2 = cli(second);
    ASSERT_EQ(r1.code, kExitOk) << r1.err;
    EXPECT_EQ(r1.out, r2.out);
    EXPECT_EQ(slurp(d / "i1.txt"), slurp(d / "i2.txt"));
  }
  EXPECT_EQ(cli({"interpret", "--checkpoint", ckpt, "--mode", "influence"}).code, kExitUsage);
  EXPECT_EQ(cli({"interpret", "--checkpoint", ckpt, "--mode", "code-coord", "--coord", "99"}).code, kExitRuntime);
}

TEST(Pipeline, ConfigDefaultsAndOverrides) {
  const auto path = workdir() / "pipeline.cfg";
  std::ofstream(path) << "# small run\nepochs = 3\nm=12\n\npatients=90\n";
  const auto cfg = load_pipeline_config(path);
  EXPECT_EQ(cfg.train.epochs, 3u);
  EXPECT_EQ(cfg.train.code_dim, 12u);
  EXPECT_EQ(cfg.train.visit_dim, PipelineConfig{}.train.visit_dim);
  EXPECT_EQ(cfg.synth.n_patients, 90u);
  EXPECT_EQ(cfg.seed, 7u);
  std::ofstream(path) << "nonsense_key = 1\n";
  EXPECT_THROW(load_pipeline_config(path), FormatError);
  std::ofstream(path) << "epochs = many\n";
  EXPECT_THROW(load_pipeline_config(path), FormatError);
}

TEST(Pipeline, ShippedConfigMatchesDefaults) {
  const auto cfg = load_pipeline_config(fs::path(MED2VEC_SOURCE_DIR) / "configs" / "pipeline.cfg");
  EXPECT_EQ(cfg.entries(), PipelineConfig{}.entries());
}

TEST(Pipeline, OneEpochRunWritesEverything) {
  const auto d = workdir() / "pipe";
  const auto cfg = workdir() / "pipe.cfg";
  std::ofstream(cfg) << "patients=150\ncodes=60\ngroups=6\nm=8\nn=8\nbatch_size=200\nprobe_epochs=2\n"
                        "auc_trials=2\nnmi_trials=3\nrecall_k=3\n";
  const auto r = cli({"pipeline", "--config", cfg.string(), "--epochs", "1", "--out", d.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream log(d / "train_log.csv");
  std::string line;
  int rows = -1;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 1);
  const auto eval = slurp(d / "eval.csv");
  for (const char *metric : {"nmi,", "recall_med2vec,", "recall_frequency,", "auc_med2vec,", "auc_shuffled,"}) {
    EXPECT_NE(eval.find(metric), std::string::npos) << metric;
  }
  EXPECT_TRUE(fs::exists(d / "influence.txt"));
  const auto manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(manifest["extra"]["epochs"], "1");
  EXPECT_EQ(manifest["extra"]["m"], "8");
}

TEST(Pipeline, FailingStageIsNamed) {
  const auto d = workdir() / "pipe_bad";
  const auto r = cli({"pipeline", "--set", "groups=1000", "--out", d.string()});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("stage 'synth'"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"pipeline", "--set", "oops", "--out", d.string()}).code, kExitUsage);
}

}  // namespace
}  // namespace med2vec
