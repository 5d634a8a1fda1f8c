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


#include "hazepark/training.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hazepark/codec.hpp"
#include "hazepark/loss.hpp"

namespace hazepark {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool is_hazy(const ManifestRecord& r) { return r.has_tag("hazy"); }

std::vector<int> gather_labels(const std::vector<int>& labels,
                               std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

int count_correct(const Tensor4<float>& probs, std::span<const int> labels) {
  int correct = 0;
  for (int n = 0; n < probs.n(); ++n) {
    const std::array<double, 2> p{probs(n, 0, 0, 0), probs(n, 1, 0, 0)};
    if (predicted_class(p) == labels[static_cast<std::size_t>(n)]) ++correct;
  }
  return correct;
}

struct EvalStat {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Eval-mode loss and accuracy of any net with forward(x, mode).
template <typename Net>
EvalStat eval_labeled(Net& net, const LabeledSet& set, int batch_size) {
  double loss = 0.0;
  int correct = 0;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t end = std::min(set.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto labels = gather_labels(set.labels, idx);
    const Tensor4<float> probs =
        net.forward(gather_batch<float>(set.images, idx), Mode::kEval);
    loss += cross_entropy(probs, labels).value * static_cast<double>(idx.size());
    correct += count_correct(probs, labels);
  }
  const auto n = static_cast<double>(set.size());
  return {loss / n, correct / n};
}

void check_both_classes(const Manifest& m, const char* what) {
  if (m.empty()) throw DataError(std::string(what) + " manifest is empty");
  if (m.count_label(0) == 0 || m.count_label(1) == 0) {
    throw DataError(std::string(what) + " manifest must contain both classes");
  }
}

nlohmann::json optimizer_json(const OptimizerConfig& o) {
  nlohmann::json j{{"kind", to_string(o.kind)},
                   {"lr", o.lr},
                   {"weight_decay", o.weight_decay},
                   {"momentum", o.momentum},
                   {"beta1", o.beta1},
                   {"beta2", o.beta2},
                   {"eps", o.eps}};
  j["clip"] = o.clip ? nlohmann::json{o.clip->lo, o.clip->hi} : nlohmann::json(nullptr);
  return j;
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j, OptimizerConfig o) {
  if (j.contains("kind")) o.kind = parse_optimizer_kind(j["kind"].get<std::string>());
  o.lr = j.value("lr", o.lr);
  o.weight_decay = j.value("weight_decay", o.weight_decay);
  o.momentum = j.value("momentum", o.momentum);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.eps = j.value("eps", o.eps);
  if (j.contains("clip")) {
    const auto& c = j["clip"];
    if (c.is_null()) {
      o.clip.reset();
    } else {
      o.clip = ClipRange{c.at(0).get<double>(), c.at(1).get<double>()};
    }
  }
  return o;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kClassifier: return "classifier";
    case Regime::kDehazerM1: return "dehazer_m1";
    case Regime::kDehazerM2: return "dehazer_m2";
    case Regime::kDehazerM3: return "dehazer_m3";
    case Regime::kJoint: return "joint";
  }
  return "unknown";
}

Regime parse_regime(const std::string& s) {
  if (s == "classifier") return Regime::kClassifier;
  if (s == "m1" || s == "dehazer_m1") return Regime::kDehazerM1;
  if (s == "m2" || s == "dehazer_m2") return Regime::kDehazerM2;
  if (s == "m3" || s == "dehazer_m3") return Regime::kDehazerM3;
  if (s == "joint") return Regime::kJoint;
  throw ConfigError("unknown regime '" + s + "'");
}

TrainConfig TrainConfig::classifier_default() {
  TrainConfig c;
  c.regime = Regime::kClassifier;
  c.optimizer = OptimizerConfig::classifier_default();
  c.batch_size = 64;
  c.epochs = 10;
  return c;
}

TrainConfig TrainConfig::dehazer_default(Regime regime) {
  TrainConfig c;
  c.regime = regime;
  c.optimizer = OptimizerConfig::dehazer_default();
  c.batch_size = 64;
  c.epochs = 5;
  return c;
}

TrainConfig TrainConfig::joint_default() {
  TrainConfig c;
  c.regime = Regime::kJoint;
  c.optimizer = OptimizerConfig::joint_default();
  c.batch_size = 64;
  c.epochs = 5;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 2) {
    throw ConfigError("batch_size must be >= 2, got " + std::to_string(batch_size));
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (input_size < 8) throw ConfigError("input_size must be >= 8");
  if (regime == Regime::kDehazerM3) {
    if (!lambda) throw ConfigError("dehazer_m3 requires lambda");
    if (!(*lambda >= 0.0 && *lambda <= 1.0)) {
      throw ConfigError("lambda must lie in [0,1]");
    }
  } else if (lambda) {
    throw ConfigError("lambda is only valid for dehazer_m3");
  }
  if (regime == Regime::kJoint && (freeze_dehazer || freeze_classifier)) {
    throw ConfigError("joint fine-tuning trains both subnets; freezing is not allowed");
  }
  const auto& o = optimizer;
  if (!(o.lr > 0.0) || !std::isfinite(o.lr)) throw ConfigError("lr must be > 0");
  if (!(o.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0,1)");
  }
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(o.eps > 0.0)) throw ConfigError("eps must be > 0");
  if (o.clip && !(o.clip->lo < o.clip->hi)) {
    throw ConfigError("clip bounds must satisfy lo < hi");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"regime", to_string(regime)},
                   {"optimizer", optimizer_json(optimizer)},
                   {"batch_size", batch_size},
                   {"epochs", epochs},
                   {"seed", seed},
                   {"input_size", input_size},
                   {"freeze_dehazer", freeze_dehazer},
                   {"freeze_classifier", freeze_classifier}};
  j["lambda"] = lambda ? nlohmann::json(*lambda) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  try {
    const Regime regime = parse_regime(j.at("regime").get<std::string>());
    TrainConfig c = regime == Regime::kClassifier ? classifier_default()
                    : regime == Regime::kJoint    ? joint_default()
                                                  : dehazer_default(regime);
    if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j["optimizer"], c.optimizer);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.input_size = j.value("input_size", c.input_size);
    c.freeze_dehazer = j.value("freeze_dehazer", c.freeze_dehazer);
    c.freeze_classifier = j.value("freeze_classifier", c.freeze_classifier);
    if (j.contains("lambda") && !j["lambda"].is_null()) {
      c.lambda = j["lambda"].get<double>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["curve"] = nlohmann::json::array();
  for (const auto& e : curve) {
    j["curve"].push_back({{"epoch", e.epoch},
                          {"split", e.split},
                          {"loss", e.loss},
                          {"accuracy", e.accuracy ? nlohmann::json(*e.accuracy)
                                                  : nlohmann::json(nullptr)}});
  }
  j["final_metrics"] = final_metrics;
  j["elapsed_seconds"] = elapsed_seconds;
  j["config"] = config;
  j["checkpoint_path"] = checkpoint_path;
  j["best_epoch"] = best_epoch;
  j["steps"] = steps;
  return j;
}

std::string TrainReport::curve_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,split,loss,accuracy\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << e.split << ',' << e.loss << ',';
    if (e.accuracy) out << *e.accuracy;
    out << '\n';
  }
  return out.str();
}

void TrainReport::write(const std::filesystem::path& dir, const std::string& stem) const {
  const std::string json = to_json().dump(2) + "\n";
  const std::string csv = curve_csv();
  write_file(dir / (stem + ".json"),
             std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
  write_file(dir / (stem + ".csv"),
             std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
}

ClassifierSpec classifier_spec_for(int input_size) {
  if (input_size == 224) return ClassifierSpec::modified_malexnet();
  return ClassifierSpec::reduced(input_size);
}

LabeledSet load_labeled(const Manifest& m, int input_size) {
  LabeledSet set;
  set.images.reserve(m.size());
  for (const auto& r : m.records) {
    set.images.push_back(resize(m.load_image(r), input_size, input_size));
    set.labels.push_back(r.label);
    set.paths.push_back(r.path);
  }
  return set;
}

template <typename T>
Tensor4<T> gather_batch(const std::vector<Image>& images,
                        std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("empty batch");
  const Image& first = images[indices[0]];
  Tensor4<T> out(static_cast<int>(indices.size()), first.channels(), first.height(),
                 first.width());
  for (int n = 0; n < out.n(); ++n) {
    const Image& img = images[indices[static_cast<std::size_t>(n)]];
    if (!img.same_shape(first)) throw ShapeError("gather_batch: mixed image shapes");
    for (int y = 0; y < out.h(); ++y) {
      for (int x = 0; x < out.w(); ++x) {
        for (int c = 0; c < out.c(); ++c) out(n, c, y, x) = static_cast<T>(img.at(y, x, c));
      }
    }
  }
  return out;
}

template Tensor4<float> gather_batch<float>(const std::vector<Image>&,
                                            std::span<const std::size_t>);
template Tensor4<double> gather_batch<double>(const std::vector<Image>&,
                                              std::span<const std::size_t>);

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    std::uint64_t seed, int epoch,
                                                    bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng = make_stream(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t end = std::min(n, start + bs);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

ClassifierRun train_classifier(const Manifest& train, const Manifest& val,
                               const TrainConfig& cfg, StepHook hook) {
  cfg.validate();
  if (cfg.regime != Regime::kClassifier) {
    throw ConfigError("train_classifier needs regime classifier");
  }
  check_both_classes(train, "training");
  const auto t0 = Clock::now();

  ClassifierNet<float> net(classifier_spec_for(cfg.input_size));
  net.init(cfg.seed);
  const LabeledSet tr = load_labeled(train, cfg.input_size);
  const LabeledSet va = load_labeled(val, cfg.input_size);
  if (tr.size() < 2) throw DataError("training needs at least 2 samples");

  const auto params = net.parameters();
  OptimizerState<float> opt;
  opt.config = cfg.optimizer;
  init_optimizer<float>(opt, params);

  TrainReport report;
  report.config = cfg.to_json();
  std::optional<Checkpoint> best;
  double best_acc = -1.0;
  EpochStat last_train;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int correct = 0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(tr.size(), cfg.batch_size, cfg.seed, epoch)) {
      const auto labels = gather_labels(tr.labels, idx);
      net.zero_grad();
      const Tensor4<float> probs =
          net.forward(gather_batch<float>(tr.images, idx), Mode::kTrain);
      const auto ce = cross_entropy(probs, labels);
      net.backward(ce.grad);
      optimizer_step<float>(opt, params);
      ++report.steps;
      loss_sum += ce.value * static_cast<double>(idx.size());
      correct += count_correct(probs, labels);
      seen += idx.size();
      if (hook) hook(report.steps, ce.value, opt);
    }
    last_train = {epoch, "train", loss_sum / static_cast<double>(seen),
                  static_cast<double>(correct) / static_cast<double>(seen)};
    report.curve.push_back(last_train);

    if (!va.images.empty()) {
      const EvalStat v = eval_labeled(net, va, cfg.batch_size);
      report.curve.push_back({epoch, "val", v.loss, v.accuracy});
      if (v.accuracy > best_acc) {
        best_acc = v.accuracy;
        report.best_epoch = epoch;
        best = net.to_checkpoint();
      }
    } else {
      report.best_epoch = epoch;
    }
  }

  if (best) net = ClassifierNet<float>::from_checkpoint(*best);
  report.final_metrics = {{"train_loss", last_train.loss},
                          {"train_accuracy", *last_train.accuracy}};
  if (best) report.final_metrics["best_val_accuracy"] = best_acc;
  report.elapsed_seconds = seconds_since(t0);
  return {std::move(net), std::move(report)};
}

std::vector<DehazeSample> clear_ratio_schedule(const Manifest& corpus, Regime regime) {
  if (regime != Regime::kDehazerM1 && regime != Regime::kDehazerM2 &&
      regime != Regime::kDehazerM3) {
    throw ConfigError("clear_ratio_schedule needs a dehazer regime");
  }
  std::vector<DehazeSample> plan;
  for (const auto& r : corpus.records) {
    if (is_hazy(r)) {
      const auto target = r.tag_value("target");
      if (!target) throw DataError("hazy record " + r.path + " has no paired clear image");
      ManifestRecord t{*target, r.label, {}};
      plan.push_back({corpus.resolve(r), corpus.resolve(t), 0});
    } else if (regime != Regime::kDehazerM1) {
      plan.push_back({corpus.resolve(r), corpus.resolve(r), 1});
    }
  }
  return plan;
}

DehazerRun train_dehazer(const Manifest& corpus, const TrainConfig& cfg,
                         DehazeSpec spec, StepHook hook) {
  cfg.validate();
  if (cfg.regime != Regime::kDehazerM1 && cfg.regime != Regime::kDehazerM2 &&
      cfg.regime != Regime::kDehazerM3) {
    throw ConfigError("train_dehazer needs regime dehazer_m1, dehazer_m2 or dehazer_m3");
  }
  const auto n_hazy = static_cast<std::size_t>(
      std::count_if(corpus.records.begin(), corpus.records.end(), is_hazy));
  const std::size_t n_clear = corpus.size() - n_hazy;
  if (cfg.regime == Regime::kDehazerM1 && n_clear > 0) {
    throw DataError("Model 1 corpus must contain only hazy records, found " +
                    std::to_string(n_clear) + " clear");
  }
  if (n_hazy == 0) throw DataError("dehazer corpus has no hazy records");
  if (cfg.regime != Regime::kDehazerM1 && n_clear == 0) {
    throw DataError("Models 2 and 3 need clear records in the corpus");
  }
  const auto t0 = Clock::now();

  const auto plan = clear_ratio_schedule(corpus, cfg.regime);
  std::vector<Image> inputs;
  std::vector<Image> targets;
  std::vector<int> ys;
  std::map<std::filesystem::path, std::size_t> target_cache;
  std::vector<std::size_t> target_of;
  for (const auto& s : plan) {
    inputs.push_back(resize(to_rgb(read_image(s.input)), cfg.input_size, cfg.input_size));
    auto [it, inserted] = target_cache.try_emplace(s.target, targets.size());
    if (inserted) {
      targets.push_back(
          resize(to_rgb(read_image(s.target)), cfg.input_size, cfg.input_size));
    }
    target_of.push_back(it->second);
    ys.push_back(s.y);
  }
  if (inputs.size() < 2) throw DataError("dehazer training needs at least 2 samples");

  DehazeNet<float> net(spec);
  net.init(cfg.seed);
  const auto params = net.parameters();
  OptimizerState<float> opt;
  opt.config = cfg.optimizer;
  init_optimizer<float>(opt, params);

  TrainReport report;
  report.config = cfg.to_json();
  report.config["dehazer"] = spec.to_json();
  double last_loss = 0.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(inputs.size(), cfg.batch_size, cfg.seed, epoch)) {
      std::vector<std::size_t> tidx;
      std::vector<double> weights;
      for (std::size_t i : idx) {
        tidx.push_back(target_of[i]);
        weights.push_back(cfg.regime == Regime::kDehazerM3
                              ? dehaze_loss_weight(ys[i], *cfg.lambda)
                              : 1.0);
      }
      net.zero_grad();
      const auto out = net.forward(gather_batch<float>(inputs, idx));
      const auto loss =
          weighted_mse_loss(out.clean, gather_batch<float>(targets, tidx), weights);
      net.backward(loss.grad);
      optimizer_step<float>(opt, params);
      ++report.steps;
      loss_sum += loss.value * static_cast<double>(idx.size());
      seen += idx.size();
      if (hook) hook(report.steps, loss.value, opt);
    }
    last_loss = loss_sum / static_cast<double>(seen);
    report.curve.push_back({epoch, "train", last_loss, std::nullopt});
  }
  report.best_epoch = cfg.epochs;
  report.final_metrics = {{"train_loss", last_loss},
                          {"samples_per_epoch", inputs.size()},
                          {"clear_per_epoch", n_clear},
                          {"hazy_per_epoch", n_hazy}};
  report.elapsed_seconds = seconds_since(t0);
  return {std::move(net), std::move(report)};
}

PipelineRun joint_finetune(DehazeNet<float> dehazer, ClassifierNet<float> classifier,
                           const Manifest& hazy_train, const TrainConfig& cfg,
                           StepHook hook) {
  cfg.validate();
  if (cfg.regime != Regime::kJoint) throw ConfigError("joint_finetune needs regime joint");
  if (hazy_train.empty()) throw DataError("joint fine-tuning manifest is empty");
  const auto t0 = Clock::now();

  PipelineNet<float> net(std::move(dehazer), std::move(classifier));
  const int size = net.input_size();
  const LabeledSet tr = load_labeled(hazy_train, size);
  if (tr.size() < 2) throw DataError("joint fine-tuning needs at least 2 samples");

  const auto params = net.parameters();
  OptimizerState<float> opt;
  opt.config = cfg.optimizer;
  init_optimizer<float>(opt, params);

  TrainReport report;
  report.config = cfg.to_json();
  report.config["input_size"] = size;
  EpochStat last;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int correct = 0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(tr.size(), cfg.batch_size, cfg.seed, epoch)) {
      const auto labels = gather_labels(tr.labels, idx);
      net.zero_grad();
      const Tensor4<float> probs =
          net.forward(gather_batch<float>(tr.images, idx), Mode::kTrain);
      const auto ce = cross_entropy(probs, labels);
      net.backward(ce.grad);
      optimizer_step<float>(opt, params);
      ++report.steps;
      loss_sum += ce.value * static_cast<double>(idx.size());
      correct += count_correct(probs, labels);
      seen += idx.size();
      if (hook) hook(report.steps, ce.value, opt);
    }
    last = {epoch, "train", loss_sum / static_cast<double>(seen),
            static_cast<double>(correct) / static_cast<double>(seen)};
    report.curve.push_back(last);
  }
  report.best_epoch = cfg.epochs;
  report.final_metrics = {{"train_loss", last.loss}, {"train_accuracy", *last.accuracy}};
  report.elapsed_seconds = seconds_since(t0);
  return {std::move(net), std::move(report)};
}

}  // namespace hazepark
