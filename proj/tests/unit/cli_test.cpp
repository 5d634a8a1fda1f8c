// Copyright 2026 The hazepark Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cli.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hazepark/checkpoint.hpp"
#include "hazepark/codec.hpp"
#include "hazepark/datasets.hpp"
#include "hazepark/error.hpp"
#include "test_support.hpp"

namespace hazepark {
namespace {

using testutil::ScratchDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump();
}

TEST(ValueList, RangesAndLists) {
  EXPECT_EQ(cli::parse_value_list("0.8:1.0:0.05", "A"),
            (std::vector<double>{0.8, 0.85, 0.9, 0.95, 1.0}));
  EXPECT_EQ(cli::parse_value_list("0.04,0.06,0.08,0.1,0.12,0.16,0.2", "beta"),
            (std::vector<double>{0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2}));
  EXPECT_EQ(cli::parse_value_list("0.5", "A"), (std::vector<double>{0.5}));
  EXPECT_EQ(cli::parse_value_list("0:0.3:0.1", "A"), (std::vector<double>{0, 0.1, 0.2, 0.3}));
  EXPECT_THROW(cli::parse_value_list("1:0:0.1", "A"), ConfigError);
  EXPECT_THROW(cli::parse_value_list("0:1:0", "A"), ConfigError);
  EXPECT_THROW(cli::parse_value_list("0:1", "A"), ConfigError);
  EXPECT_THROW(cli::parse_value_list("0.1,x", "A"), ConfigError);
  EXPECT_THROW(cli::parse_value_list("", "A"), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"no-such-command"}, {"make-toy"}, {"make-toy", "--out", "x", "--bogus"},
           {"make-toy", "--out", "x", "--n-per-class", "many"}}) {
    const Outcome o = run(args);
    EXPECT_EQ(o.code, cli::kUsage) << o.err;
    EXPECT_EQ(o.err.rfind("error: usage: ", 0), 0u) << o.err;
    EXPECT_EQ(std::count(o.err.begin(), o.err.end(), '\n'), 1) << o.err;
  }
}

TEST(Cli, HelpExitsZero) {
  const Outcome o = run({"make-toy", "--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("--n-per-class"), std::string::npos);
}

TEST(Cli, MakeToyEchoesResolvedConfig) {
  ScratchDir dir("cli");
  const Outcome o = run({"make-toy", "--out", (dir / "toy").string(), "--n-per-class", "10",
                         "--size", "16", "--seed", "3"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(read_manifest(dir / "toy/train.csv").size(), 14u);
  const auto cfg = load_json(dir / "toy/resolved_config.json");
  EXPECT_EQ(cfg["command"], "make-toy");
  EXPECT_EQ(cfg["seed"], 3);
  EXPECT_EQ(cfg["flags"]["n-per-class"], 10);
  EXPECT_EQ(cfg["flags"]["size"], 16);
}

TEST(Cli, ConfigFileFillsUnsetFlagsOnly) {
  ScratchDir dir("cli");
  write_json(dir / "c.json", {{"n_per_class", 12}, {"size", 16}, {"seed", 9}});
  Outcome o = run({"make-toy", "--config", (dir / "c.json").string(), "--out",
                   (dir / "a").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  auto cfg = load_json(dir / "a/resolved_config.json");
  EXPECT_EQ(cfg["flags"]["n-per-class"], 12);
  EXPECT_EQ(cfg["seed"], 9);
  o = run({"make-toy", "--n-per-class", "11", "--config", (dir / "c.json").string(), "--out",
           (dir / "b").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  cfg = load_json(dir / "b/resolved_config.json");
  EXPECT_EQ(cfg["flags"]["n-per-class"], 11);
  EXPECT_EQ(cfg["flags"]["size"], 16);
}

TEST(Cli, ConfigErrorsExitThree) {
  ScratchDir dir("cli");
  write_json(dir / "bad.json", {{"no_such_flag", 1}});
  std::ofstream(dir / "broken.json") << "{not json";
  write_json(dir / "list.json", nlohmann::json::array({1, 2}));
  for (const char* name : {"bad.json", "broken.json", "list.json", "missing.json"}) {
    const Outcome o = run({"make-toy", "--out", (dir / "t").string(), "--config",
                           (dir / name).string()});
    EXPECT_EQ(o.code, cli::kConfigOrFile) << name << ": " << o.err;
    EXPECT_EQ(o.err.rfind("error: ", 0), 0u);
  }
  const Outcome small = run({"make-toy", "--out", (dir / "t").string(), "--n-per-class", "3"});
  EXPECT_EQ(small.code, cli::kConfigOrFile);
  EXPECT_EQ(small.err.rfind("error: config: ", 0), 0u) << small.err;
}

TEST(Cli, DataErrorsExitFour) {
  ScratchDir dir("cli");
  std::ofstream(dir / "m.csv") << "path,label,tags\na.png,7,\n";
  const Outcome o = run({"augment", "--manifest", (dir / "m.csv").string(), "--out",
                         (dir / "aug").string(), "--multiplier", "2"});
  EXPECT_EQ(o.code, cli::kData) << o.err;
  EXPECT_EQ(o.err.rfind("error: data: ", 0), 0u) << o.err;
}

TEST(Cli, SynthHazeBuildsRequestedGrid) {
  ScratchDir dir("cli");
  ASSERT_EQ(run({"make-toy", "--out", (dir / "toy").string(), "--n-per-class", "10",
                 "--size", "16"}).code, 0);
  Manifest two = read_manifest(dir / "toy/train.csv");
  two.records.resize(2);
  for (auto& r : two.records) r.path = (dir / "toy" / r.path).string();
  write_manifest(dir / "two.csv", two);
  const Outcome o = run({"synth-haze", "--sources", (dir / "two.csv").string(), "--out",
                         (dir / "haze").string(), "--a", "0.8:1.0:0.05", "--beta",
                         "0.04,0.06,0.08,0.1,0.12,0.16,0.2"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(read_manifest(dir / "haze/manifest.csv").size(), 2u * 36);
  const auto cfg = load_json(dir / "haze/resolved_config.json");
  EXPECT_EQ(cfg["airlights"].size(), 5u);
  EXPECT_EQ(cfg["betas"].size(), 7u);
}

// make-toy -> train-classifier -> synth-haze -> train-dehazer -> joint-tune
// -> eval -> bench -> infer, all on tiny settings.
TEST(Cli, EndToEndWorkflow) {
  ScratchDir dir("cli");
  auto p = [&](const std::string& rel) { return (dir / rel).string(); };
  auto ok = [](const Outcome& o) {
    EXPECT_EQ(o.code, 0) << o.err;
    return o.code == 0;
  };
  ASSERT_TRUE(ok(run({"make-toy", "--out", p("toy"), "--n-per-class", "12", "--size", "32"})));
  const std::vector<std::string> fast{"--epochs", "1", "--batch-size", "8", "--input-size", "32"};
  auto with = [&](std::vector<std::string> args, const std::vector<std::string>& extra) {
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  ASSERT_TRUE(ok(run(with({"train-classifier", "--train", p("toy/train.csv"), "--val",
                           p("toy/test.csv"), "--out", p("cls"), "--model-id", "c0"},
                          fast))));
  EXPECT_TRUE(std::filesystem::exists(dir / "cls/train_report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cls/train_report.csv"));
  EXPECT_EQ(read_checkpoint(dir / "cls/classifier.ckpt").meta["model_id"], "c0");

  ASSERT_TRUE(ok(run({"synth-haze", "--sources", p("toy/train.csv"), "--out", p("haze"),
                      "--a", "0.9", "--beta", "0.1,0.2"})));
  const Outcome bad_lambda = run(with({"train-dehazer", "--corpus", p("haze/manifest.csv"),
                                       "--out", p("dh"), "--regime", "m2", "--lambda", "0.3"},
                                      fast));
  EXPECT_EQ(bad_lambda.code, cli::kConfigOrFile);
  ASSERT_TRUE(ok(run(with({"train-dehazer", "--corpus", p("haze/manifest.csv"), "--out",
                           p("dh"), "--regime", "m3", "--lambda", "0.4291", "--seed", "7"},
                          fast))));
  const auto dcfg = load_json(dir / "dh/resolved_config.json");
  EXPECT_DOUBLE_EQ(dcfg["train_config"]["lambda"].get<double>(), 0.4291);
  EXPECT_EQ(dcfg["train_config"]["seed"], 7);

  // Joint tuning on the hazy records only.
  Manifest hazy = read_manifest(dir / "haze/manifest.csv");
  std::erase_if(hazy.records, [](const ManifestRecord& r) { return !r.has_tag("hazy"); });
  for (auto& r : hazy.records) r.path = (dir / "haze" / r.path).string();
  write_manifest(dir / "hazy.csv", hazy);
  ASSERT_TRUE(ok(run({"joint-tune", "--dehazer", p("dh/dehazer.ckpt"), "--classifier",
                      p("cls/classifier.ckpt"), "--train", p("hazy.csv"), "--out", p("joint"),
                      "--epochs", "1", "--batch-size", "8"})));

  ASSERT_TRUE(ok(run({"eval", "--classifier", p("cls/classifier.ckpt"), "--test",
                      "clear=" + p("toy/test.csv"), "--test", "hazy=" + p("hazy.csv"),
                      "--out", p("ev")})));
  ASSERT_TRUE(ok(run({"eval", "--pipeline", p("joint/pipeline.ckpt"), "--test",
                      "hazy=" + p("hazy.csv"), "--out", p("ev2")})));
  const auto ev = load_json(dir / "ev/eval.json");
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0]["n_samples"], 8);
  EXPECT_TRUE(std::filesystem::exists(dir / "ev/comparison.md"));
  ASSERT_TRUE(ok(run({"eval", "--dehazer", p("dh/dehazer.ckpt"), "--test",
                      "haze=" + p("haze/manifest.csv"), "--out", p("dq")})));
  EXPECT_TRUE(std::filesystem::exists(dir / "dq/dehaze_quality.json"));

  ASSERT_TRUE(ok(run({"bench", "--classifier", p("cls/classifier.ckpt"), "--dehazer",
                      p("dh/dehazer.ckpt"), "--patches", p("toy/test.csv"), "--out",
                      p("bench"), "--warmup", "1", "--runs", "3"})));
  const auto bench = load_json(dir / "bench/bench.json");
  EXPECT_EQ(bench.size(), 2u);  // with and without the dehazer
  for (const auto& b : bench) EXPECT_EQ(b["n_patches"], 3);

  // One frame holding two toy patches.
  const Manifest test = read_manifest(dir / "toy/test.csv");
  Image frame(40, 80, 3, 0.5f);
  SlotMask mask;
  for (int i = 0; i < 2; ++i) {
    const Image patch = test.load_image(test.records[static_cast<std::size_t>(i)]);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) frame.at(4 + y, 4 + 40 * i + x, c) = patch.at(y, x, c);
      }
    }
    const double l = 4 + 40 * i;
    mask.slots.push_back({"s" + std::to_string(i), {{{l, 4}, {l + 32, 4}, {l + 32, 36}, {l, 36}}}});
  }
  write_png(dir / "frame.png", frame);
  write_slot_mask(dir / "mask.json", mask);
  ASSERT_TRUE(ok(run({"infer", "--mask", p("mask.json"), "--classifier",
                      p("cls/classifier.ckpt"), "--frames", p("frame.png"), "--output",
                      p("inf/report.jsonl")})));
  std::ifstream lines(dir / "inf/report.jsonl");
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  const auto rep = nlohmann::json::parse(line);
  EXPECT_EQ(rep["slots"].size(), 2u);
  EXPECT_EQ(rep["model_id"], "c0");
  EXPECT_TRUE(std::filesystem::exists(dir / "inf/resolved_config.json"));

  // Both a classifier and a pipeline is a config error; no decodable frame
  // is a data error.
  EXPECT_EQ(run({"infer", "--mask", p("mask.json"), "--classifier", p("cls/classifier.ckpt"),
                 "--pipeline", p("joint/pipeline.ckpt"), "--frames", p("frame.png"),
                 "--output", p("inf/x.jsonl")}).code,
            cli::kConfigOrFile);
  EXPECT_EQ(run({"infer", "--mask", p("mask.json"), "--classifier", p("cls/classifier.ckpt"),
                 "--frames", p("nothing*.png"), "--output", p("inf/y.jsonl")}).code,
            cli::kData);
}

}  // namespace
}  // namespace hazepark
