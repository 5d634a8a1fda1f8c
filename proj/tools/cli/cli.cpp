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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hazepark/checkpoint.hpp"
#include "hazepark/codec.hpp"
#include "hazepark/datasets.hpp"
#include "hazepark/error.hpp"
#include "hazepark/evaluate.hpp"
#include "hazepark/occupancy.hpp"
#include "hazepark/pipeline.hpp"
#include "hazepark/training.hpp"

namespace hazepark::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
  return parts;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(what + ": '" + s + "' is not a number");
}

}  // namespace

/// "lo:hi:step" (inclusive) or a comma-separated list.
std::vector<double> parse_value_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError(what + ": expected lo:hi:step");
    const double lo = parse_number(parts[0], what);
    const double hi = parse_number(parts[1], what);
    const double step = parse_number(parts[2], what);
    if (step <= 0.0 || hi < lo) throw ConfigError(what + ": empty range " + text);
    const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) {
      // Round away the accumulated binary error of lo + i * step.
      values.push_back(std::round((lo + i * step) * 1e9) / 1e9);
    }
  } else {
    for (const auto& p : split(text, ',')) values.push_back(parse_number(p, what));
  }
  if (values.empty()) throw ConfigError(what + ": no values");
  return values;
}

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  CLI::App* sub = nullptr;
  std::uint64_t seed = 0;
};

// ---- config file and echo --------------------------------------------------

std::string key_of(const CLI::Option* opt) { return opt->get_single_name(); }

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

bool is_vector(const CLI::Option* opt) {
  return opt->get_items_expected_max() > 1;
}

std::string scalar_token(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw ConfigError("config key '" + key + "' must be a scalar");
}

/// Turns config-file entries into command-line tokens for every option the
/// command line did not set, so explicit flags always win.
std::vector<std::string> config_tokens(const json& cfg, CLI::App* sub) {
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [raw_key, value] : cfg.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ConfigError("config key '" + raw_key + "' is not an option of " +
                        sub->get_name());
    }
    if (opt->count() > 0) continue;
    if (is_flag(opt)) {
      if (!value.is_boolean()) throw ConfigError("config key '" + raw_key + "' must be boolean");
      if (value.get<bool>()) tokens.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& v : value) tokens.push_back("--" + key + "=" + scalar_token(v, raw_key));
    } else {
      tokens.push_back("--" + key + "=" + scalar_token(value, raw_key));
    }
  }
  return tokens;
}

json typed(const std::string& s) {
  json v = json::parse(s, nullptr, false);
  return v.is_number() ? v : json(s);
}

/// Every option of the subcommand with its resolved value.
json resolved_flags(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string key = key_of(opt);
    if (key == "help" || key == "config") continue;
    if (is_flag(opt)) {
      j[key] = opt->count() > 0;
    } else if (is_vector(opt)) {
      j[key] = json::array();
      for (const auto& r : opt->results()) j[key].push_back(typed(r));
    } else if (!opt->results().empty()) {
      j[key] = typed(opt->results().back());
    } else if (!opt->get_default_str().empty()) {
      j[key] = typed(opt->get_default_str());
    } else {
      j[key] = nullptr;
    }
  }
  return j;
}

void echo_config(const Context& ctx, const fs::path& dir, json extra = json::object()) {
  json j;
  j["command"] = ctx.sub->get_name();
  j["seed"] = ctx.seed;
  j["flags"] = resolved_flags(ctx.sub);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_text(dir / "resolved_config.json", j.dump(2) + "\n");
}

// ---- shared option groups --------------------------------------------------

struct TrainOverrides {
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<double> clip;
  std::optional<int> input_size;

  void add_to(CLI::App* sub, bool with_input_size) {
    sub->add_option("--epochs", epochs, "Training epochs");
    sub->add_option("--batch-size", batch_size, "Minibatch size (>= 2)");
    sub->add_option("--lr", lr, "Learning rate");
    sub->add_option("--weight-decay", weight_decay, "L2 weight decay");
    sub->add_option("--clip", clip, "Clip gradients to [-clip, clip]; 0 disables");
    if (with_input_size) {
      sub->add_option("--input-size", input_size,
                      "Square input side; 224 selects the full classifier");
    }
  }

  void apply(TrainConfig& cfg, std::uint64_t seed) const {
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.optimizer.lr = *lr;
    if (weight_decay) cfg.optimizer.weight_decay = *weight_decay;
    if (clip) {
      cfg.optimizer.clip = *clip > 0.0 ? std::optional<ClipRange>(ClipRange{-*clip, *clip})
                                       : std::nullopt;
    }
    if (input_size) cfg.input_size = *input_size;
    cfg.seed = seed;
    cfg.validate();
  }
};

json checkpoint_meta(const std::string& model_id, const TrainConfig& cfg) {
  return {{"model_id", model_id}, {"train_config", cfg.to_json()}};
}

// ---- subcommands -----------------------------------------------------------

struct SynthHazeArgs {
  std::string sources;
  std::string out;
  std::string a = "0.8:1.0:0.05";
  std::string beta = "0.04,0.06,0.08,0.1,0.12,0.16,0.2";
  bool procedural_depth = false;
  bool no_clear = false;
};

void add_synth_haze(CLI::App* sub, SynthHazeArgs& a) {
  sub->add_option("--sources", a.sources, "Manifest of clear source images")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--a", a.a, "Atmospheric light values: lo:hi:step or a,b,c");
  sub->add_option("--beta", a.beta, "Scattering coefficients: lo:hi:step or a,b,c");
  sub->add_flag("--procedural-depth", a.procedural_depth,
                "Draw a procedural depth map for sources without a depth= tag");
  sub->add_flag("--no-clear", a.no_clear, "Leave clear originals out of the manifest");
}

int run_synth_haze(const Context& ctx, const SynthHazeArgs& a) {
  HazeGrid grid{parse_value_list(a.a, "--a"), parse_value_list(a.beta, "--beta")};
  grid.validate();
  HazeCorpusOptions opts;
  opts.seed = ctx.seed;
  opts.procedural_depth = a.procedural_depth;
  opts.include_clear = !a.no_clear;
  const Manifest sources = read_manifest(a.sources);
  const Manifest corpus = build_haze_corpus(sources, grid, a.out, opts);
  echo_config(ctx, a.out, {{"airlights", grid.airlights}, {"betas", grid.betas}});
  ctx.out << "wrote " << corpus.size() << " records (" << grid.size()
          << " hazy variants per source) to " << (fs::path(a.out) / "manifest.csv").string()
          << "\n";
  return kOk;
}

struct AugmentArgs {
  std::string manifest;
  std::string out;
  int multiplier = 0;
};

void add_augment(CLI::App* sub, AugmentArgs& a) {
  sub->add_option("--manifest", a.manifest, "Input patch manifest")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--multiplier", a.multiplier, "Augmented variants per patch")->required();
}

int run_augment(const Context& ctx, const AugmentArgs& a) {
  const Manifest in = read_manifest(a.manifest);
  const Manifest out = augment_patches(in, a.out, a.multiplier, ctx.seed);
  echo_config(ctx, a.out);
  ctx.out << "wrote " << out.size() << " augmented patches to "
          << (fs::path(a.out) / "manifest.csv").string() << "\n";
  return kOk;
}

struct MakeToyArgs {
  std::string out;
  int n_per_class = 100;
  int size = 32;
};

void add_make_toy(CLI::App* sub, MakeToyArgs& a) {
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--n-per-class", a.n_per_class, "Patches per class (>= 10)")
      ->capture_default_str();
  sub->add_option("--size", a.size, "Patch side in pixels")->capture_default_str();
}

int run_make_toy(const Context& ctx, const MakeToyArgs& a) {
  const ToyCorpus toy = make_toy_corpus(a.n_per_class, ctx.seed, a.out, a.size);
  echo_config(ctx, a.out);
  ctx.out << "wrote " << toy.train.size() << " train and " << toy.test.size()
          << " test patches to " << a.out << "\n";
  return kOk;
}

struct TrainClassifierArgs {
  std::string train;
  std::string val;
  std::string out;
  std::string model_id = "classifier";
  TrainOverrides overrides;
};

void add_train_classifier(CLI::App* sub, TrainClassifierArgs& a) {
  sub->add_option("--train", a.train, "Training manifest")->required();
  sub->add_option("--val", a.val, "Validation manifest for checkpoint selection");
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--model-id", a.model_id, "Identifier stored in the checkpoint")
      ->capture_default_str();
  a.overrides.add_to(sub, true);
}

int run_train_classifier(const Context& ctx, const TrainClassifierArgs& a) {
  TrainConfig cfg = TrainConfig::classifier_default();
  a.overrides.apply(cfg, ctx.seed);
  const Manifest train = read_manifest(a.train);
  const Manifest val = a.val.empty() ? Manifest{} : read_manifest(a.val);
  echo_config(ctx, a.out, {{"train_config", cfg.to_json()}});
  ClassifierRun run = train_classifier(train, val, cfg);
  const fs::path ckpt = fs::path(a.out) / "classifier.ckpt";
  write_checkpoint(ckpt, run.net.to_checkpoint(checkpoint_meta(a.model_id, cfg)));
  run.report.checkpoint_path = ckpt.string();
  run.report.write(a.out, "train_report");
  ctx.out << "classifier " << run.report.final_metrics.dump() << " -> " << ckpt.string()
          << "\n";
  return kOk;
}

struct TrainDehazerArgs {
  std::string corpus;
  std::string out;
  std::string regime = "m1";
  std::optional<double> lambda;
  std::string model_id = "dehazer";
  TrainOverrides overrides;
};

void add_train_dehazer(CLI::App* sub, TrainDehazerArgs& a) {
  sub->add_option("--corpus", a.corpus, "Haze corpus manifest")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--regime", a.regime, "m1 (hazy only), m2 (hazy + clear), m3 (weighted)")
      ->capture_default_str();
  sub->add_option("--lambda", a.lambda, "Clear/hazy trade-off in [0, 1]; m3 only");
  sub->add_option("--model-id", a.model_id, "Identifier stored in the checkpoint")
      ->capture_default_str();
  a.overrides.add_to(sub, true);
}

int run_train_dehazer(const Context& ctx, const TrainDehazerArgs& a) {
  Regime regime;
  try {
    regime = parse_regime(a.regime);
  } catch (const Error&) {
    throw ConfigError("--regime must be m1, m2 or m3, got '" + a.regime + "'");
  }
  if (regime != Regime::kDehazerM1 && regime != Regime::kDehazerM2 &&
      regime != Regime::kDehazerM3) {
    throw ConfigError("--regime must be m1, m2 or m3, got '" + a.regime + "'");
  }
  TrainConfig cfg = TrainConfig::dehazer_default(regime);
  cfg.lambda = a.lambda;
  a.overrides.apply(cfg, ctx.seed);
  const Manifest corpus = read_manifest(a.corpus);
  echo_config(ctx, a.out, {{"train_config", cfg.to_json()}});
  DehazerRun run = train_dehazer(corpus, cfg);
  const fs::path ckpt = fs::path(a.out) / "dehazer.ckpt";
  write_checkpoint(ckpt, run.net.to_checkpoint(checkpoint_meta(a.model_id, cfg)));
  run.report.checkpoint_path = ckpt.string();
  run.report.write(a.out, "train_report");
  ctx.out << "dehazer " << run.report.final_metrics.dump() << " -> " << ckpt.string() << "\n";
  return kOk;
}

struct JointArgs {
  std::string dehazer;
  std::string classifier;
  std::string train;
  std::string out;
  std::string model_id = "pipeline";
  TrainOverrides overrides;
};

void add_joint(CLI::App* sub, JointArgs& a) {
  sub->add_option("--dehazer", a.dehazer, "Dehazer checkpoint")->required();
  sub->add_option("--classifier", a.classifier, "Classifier checkpoint")->required();
  sub->add_option("--train", a.train, "Labeled hazy training manifest")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--model-id", a.model_id, "Identifier stored in the checkpoint")
      ->capture_default_str();
  a.overrides.add_to(sub, false);
}

int run_joint(const Context& ctx, const JointArgs& a) {
  auto dehazer = DehazeNet<float>::from_checkpoint(read_checkpoint(a.dehazer));
  auto classifier = ClassifierNet<float>::from_checkpoint(read_checkpoint(a.classifier));
  TrainConfig cfg = TrainConfig::joint_default();
  cfg.input_size = classifier.spec().input_size;
  a.overrides.apply(cfg, ctx.seed);
  const Manifest train = read_manifest(a.train);
  echo_config(ctx, a.out, {{"train_config", cfg.to_json()}});
  PipelineRun run = joint_finetune(std::move(dehazer), std::move(classifier), train, cfg);
  const fs::path ckpt = fs::path(a.out) / "pipeline.ckpt";
  write_checkpoint(ckpt, run.net.to_checkpoint(checkpoint_meta(a.model_id, cfg)));
  run.report.checkpoint_path = ckpt.string();
  run.report.write(a.out, "train_report");
  ctx.out << "joint " << run.report.final_metrics.dump() << " -> " << ckpt.string() << "\n";
  return kOk;
}

/// Classifier, pipeline, or dehazer + classifier, loaded from checkpoints.
struct ModelArgs {
  std::string classifier;
  std::string pipeline;
  std::string dehazer;
  std::string model_id;

  void add_to(CLI::App* sub) {
    sub->add_option("--classifier", classifier, "Classifier checkpoint");
    sub->add_option("--pipeline", pipeline, "Jointly tuned pipeline checkpoint");
    sub->add_option("--dehazer", dehazer, "Dehazer checkpoint run before the classifier");
    sub->add_option("--model-id", model_id, "Label for results (default: from checkpoint)");
  }
};

std::string meta_id(const Checkpoint& ckpt, const std::string& path) {
  if (ckpt.meta.contains("model_id") && ckpt.meta["model_id"].is_string()) {
    return ckpt.meta["model_id"].get<std::string>();
  }
  return fs::path(path).stem().string();
}

struct LoadedModel {
  std::string id;
  int input_size = 0;
  std::optional<ClassifierNet<float>> classifier;
  std::optional<PipelineNet<float>> pipeline;

  std::array<double, 2> predict(const Image& patch) {
    return pipeline ? pipeline->predict(patch) : classifier->predict(patch);
  }
};

LoadedModel load_model(const ModelArgs& a) {
  if (a.classifier.empty() == a.pipeline.empty()) {
    throw ConfigError("give exactly one of --classifier and --pipeline");
  }
  if (!a.pipeline.empty() && !a.dehazer.empty()) {
    throw ConfigError("--dehazer cannot be combined with --pipeline");
  }
  LoadedModel m;
  if (!a.pipeline.empty()) {
    const Checkpoint ckpt = read_checkpoint(a.pipeline);
    m.pipeline = PipelineNet<float>::from_checkpoint(ckpt);
    m.id = meta_id(ckpt, a.pipeline);
    m.input_size = m.pipeline->input_size();
  } else {
    const Checkpoint ckpt = read_checkpoint(a.classifier);
    auto classifier = ClassifierNet<float>::from_checkpoint(ckpt);
    m.id = meta_id(ckpt, a.classifier);
    m.input_size = classifier.spec().input_size;
    if (!a.dehazer.empty()) {
      const Checkpoint dckpt = read_checkpoint(a.dehazer);
      m.id = meta_id(dckpt, a.dehazer) + "+" + m.id;
      m.pipeline.emplace(DehazeNet<float>::from_checkpoint(dckpt), std::move(classifier));
    } else {
      m.classifier = std::move(classifier);
    }
  }
  if (!a.model_id.empty()) m.id = a.model_id;
  return m;
}

struct EvalArgs {
  ModelArgs model;
  std::vector<std::string> tests;
  std::string out;
};

void add_eval(CLI::App* sub, EvalArgs& a) {
  a.model.add_to(sub);
  sub->add_option("--test", a.tests, "Test manifest as [name=]path; repeatable")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
}

std::pair<std::string, std::string> named_path(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {spec, spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

int run_eval(const Context& ctx, const EvalArgs& a) {
  // A lone dehazer is scored on restoration quality instead of accuracy.
  if (a.model.classifier.empty() && a.model.pipeline.empty() && !a.model.dehazer.empty()) {
    auto net = DehazeNet<float>::from_checkpoint(read_checkpoint(a.model.dehazer));
    json rows = json::array();
    for (const auto& spec : a.tests) {
      const auto [name, path] = named_path(spec);
      const DehazeQuality q = dehaze_quality(net, read_manifest(path));
      rows.push_back({{"dataset_id", name},
                      {"mean_mse", q.mean_mse},
                      {"mean_psnr", q.mean_psnr},
                      {"n_pairs", q.n_pairs}});
      ctx.out << name << ": mse " << q.mean_mse << ", psnr " << q.mean_psnr << " dB over "
              << q.n_pairs << " pairs\n";
    }
    echo_config(ctx, a.out);
    write_text(fs::path(a.out) / "dehaze_quality.json", rows.dump(2) + "\n");
    return kOk;
  }

  LoadedModel model = load_model(a.model);
  std::vector<EvalResult> results;
  for (const auto& spec : a.tests) {
    const auto [name, path] = named_path(spec);
    const Manifest test = read_manifest(path);
    results.push_back(evaluate_classifier(
        [&](const Image& p) { return model.predict(p); }, test, model.input_size, model.id,
        name));
    for (const auto& e : results.back().errors) {
      ctx.err << "warning: " << e.path << ": " << e.message << "\n";
    }
  }
  echo_config(ctx, a.out);
  json all = json::array();
  std::string csv = EvalResult::csv_header() + "\n";
  for (const auto& r : results) {
    all.push_back(r.to_json());
    csv += r.csv_row() + "\n";
  }
  write_text(fs::path(a.out) / "eval.json", all.dump(2) + "\n");
  write_text(fs::path(a.out) / "eval.csv", csv);
  const ComparisonTable table = compare_models(results);
  write_text(fs::path(a.out) / "comparison.md", table.to_markdown());
  ctx.out << table.to_markdown();
  return kOk;
}

struct BenchArgs {
  ModelArgs model;
  std::string patches;
  std::string out;
  int warmup = 5;
  int runs = 50;
};

void add_bench(CLI::App* sub, BenchArgs& a) {
  a.model.add_to(sub);
  sub->add_option("--patches", a.patches, "Manifest of patches to time on")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--warmup", a.warmup, "Untimed warm-up calls")->capture_default_str();
  sub->add_option("--runs", a.runs, "Timed single-patch calls")->capture_default_str();
}

int run_bench(const Context& ctx, const BenchArgs& a) {
  if (a.warmup < 0 || a.runs < 1) throw ConfigError("--warmup must be >= 0 and --runs >= 1");
  const Manifest patches = read_manifest(a.patches);
  std::vector<BenchResult> results;
  LoadedModel model = load_model(a.model);
  results.push_back(bench_runtime([&](const Image& p) { model.predict(p); }, patches,
                                  model.input_size, a.warmup, a.runs, model.id));
  // With a separate dehazer, also time the bare classifier for comparison.
  if (!a.model.dehazer.empty()) {
    ModelArgs bare = a.model;
    bare.dehazer.clear();
    bare.model_id.clear();
    LoadedModel classify_only = load_model(bare);
    results.push_back(bench_runtime([&](const Image& p) { classify_only.predict(p); },
                                    patches, classify_only.input_size, a.warmup, a.runs,
                                    classify_only.id));
  }
  echo_config(ctx, a.out);
  json all = json::array();
  std::string csv = BenchResult::csv_header() + "\n";
  for (const auto& r : results) {
    all.push_back(r.to_json());
    csv += r.csv_row() + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-32s %.6f s/patch (std %.6f, n=%zu)\n",
                  r.model_id.c_str(), r.mean_seconds, r.std_seconds, r.n_patches);
    ctx.out << line;
  }
  write_text(fs::path(a.out) / "bench.json", all.dump(2) + "\n");
  write_text(fs::path(a.out) / "bench.csv", csv);
  return kOk;
}

struct InferArgs {
  std::string mask;
  std::string dehazer;
  std::string classifier;
  std::string pipeline;
  std::vector<std::string> frames;
  std::string output;
  bool dehaze_frame = false;
};

void add_infer(CLI::App* sub, InferArgs& a) {
  sub->add_option("--mask", a.mask, "Slot mask JSON")->required();
  sub->add_option("--dehazer", a.dehazer, "Dehazer checkpoint; omit for the bare classifier");
  sub->add_option("--classifier", a.classifier, "Classifier checkpoint");
  sub->add_option("--pipeline", a.pipeline, "Jointly tuned pipeline checkpoint");
  sub->add_option("--frames", a.frames, "Frame paths or glob patterns")->required();
  sub->add_option("--output", a.output, "Report file (one JSON line per frame)")->required();
  sub->add_flag("--dehaze-frame", a.dehaze_frame,
                "Dehaze each whole frame once before slot extraction");
}

int run_infer(const Context& ctx, const InferArgs& a) {
  PipelineConfig cfg;
  cfg.mask = a.mask;
  if (!a.dehazer.empty()) cfg.dehazer_checkpoint = a.dehazer;
  if (!a.classifier.empty()) cfg.classifier_checkpoint = a.classifier;
  if (!a.pipeline.empty()) cfg.pipeline_checkpoint = a.pipeline;
  cfg.frames = a.frames;
  cfg.output = a.output;
  cfg.dehaze_frame = a.dehaze_frame;
  cfg.validate();
  const fs::path out_dir = fs::path(a.output).has_parent_path()
                               ? fs::path(a.output).parent_path()
                               : fs::path(".");
  echo_config(ctx, out_dir, {{"pipeline_config", cfg.to_json()}});
  const PipelineRunResult result = run_pipeline(cfg);
  if (result.reports.empty()) {
    throw DataError(result.failures.empty() ? "no frames matched"
                                            : "no frame could be decoded");
  }
  for (const auto& r : result.reports) {
    ctx.out << r.frame << ": " << r.free_count << " free, " << r.busy_count << " busy\n";
  }
  return kOk;
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig:
    case ErrorCategory::kFormat:
    case ErrorCategory::kIo:
      return kConfigOrFile;
    case ErrorCategory::kData:
    case ErrorCategory::kDecode:
    case ErrorCategory::kInput:
    case ErrorCategory::kMask:
      return kData;
    default:
      return kInternal;
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

/// All subcommands and their argument structs, rebuilt for every parse.
struct Command {
  CLI::App app{"Parking occupancy detection under haze", "hazepark"};
  std::uint64_t seed = 0;
  std::string config;
  SynthHazeArgs synth;
  AugmentArgs augment;
  MakeToyArgs toy;
  TrainClassifierArgs train_classifier;
  TrainDehazerArgs train_dehazer;
  JointArgs joint;
  EvalArgs eval;
  BenchArgs bench;
  InferArgs infer;
  std::vector<std::pair<CLI::App*, std::function<int(const Context&)>>> handlers;

  Command() {
    app.require_subcommand(1);
    auto add = [&](const char* name, const char* help, auto setup, auto& args,
                   auto handler) {
      CLI::App* sub = app.add_subcommand(name, help);
      sub->add_option("--seed", seed, "Random seed")->capture_default_str();
      sub->add_option("--config", config, "JSON file of flag values; flags override it");
      setup(sub, args);
      handlers.emplace_back(sub, [&args, handler](const Context& ctx) {
        return handler(ctx, args);
      });
    };
    add("synth-haze", "Synthesize a haze grid over clear images", add_synth_haze, synth,
        run_synth_haze);
    add("augment", "Flip/crop augmentation of parking patches", add_augment, augment,
        run_augment);
    add("make-toy", "Render the procedural toy parking-patch corpus", add_make_toy, toy,
        run_make_toy);
    add("train-classifier", "Train the occupancy classifier", add_train_classifier,
        train_classifier, run_train_classifier);
    add("train-dehazer", "Train the dehazer (m1, m2 or m3)", add_train_dehazer,
        train_dehazer, run_train_dehazer);
    add("joint-tune", "Fine-tune dehazer and classifier end to end", add_joint, joint,
        run_joint);
    add("eval", "Accuracy (or dehazing quality) on test manifests", add_eval, eval,
        run_eval);
    add("bench", "Per-patch inference latency", add_bench, bench, run_bench);
    add("infer", "Occupancy reports for camera frames", add_infer, infer, run_infer);
  }

  CLI::App* selected() {
    const auto subs = app.get_subcommands();
    return subs.empty() ? nullptr : subs.front();
  }

  void parse(std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    auto cmd = std::make_unique<Command>();
    try {
      cmd->parse(args);
      if (!cmd->config.empty()) {
        const json file = read_json_file(cmd->config);
        std::vector<std::string> merged = {cmd->selected()->get_name()};
        const auto extra = config_tokens(file, cmd->selected());
        merged.insert(merged.end(), extra.begin(), extra.end());
        merged.insert(merged.end(), args.begin() + 1, args.end());
        cmd = std::make_unique<Command>();
        cmd->parse(merged);
      }
    } catch (const CLI::CallForHelp& e) {
      return cmd->app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return cmd->app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      err << "error: usage: " << one_line(e.what()) << "\n";
      return kUsage;
    }
    CLI::App* sub = cmd->selected();
    for (const auto& [app, handler] : cmd->handlers) {
      if (app == sub) return handler(Context{out, err, sub, cmd->seed});
    }
    err << "error: usage: no subcommand\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.category()) << ": " << one_line(e.what()) << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << one_line(e.what()) << "\n";
    return kConfigOrFile;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
    return kInternal;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hazepark::cli
