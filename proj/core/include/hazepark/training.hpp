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


// Training procedures: the occupancy classifier, the three dehazer regimes
// and joint fine-tuning of the serial pipeline.

#ifndef HAZEPARK_TRAINING_HPP_
#define HAZEPARK_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/classifier.hpp"
#include "hazepark/datasets.hpp"
#include "hazepark/dehazer.hpp"
#include "hazepark/optim.hpp"
#include "hazepark/pipeline.hpp"

namespace hazepark {

enum class Regime { kClassifier, kDehazerM1, kDehazerM2, kDehazerM3, kJoint };

std::string to_string(Regime r);
/// Accepts "classifier", "m1".."m3" (or "dehazer_m1".."dehazer_m3"), "joint".
Regime parse_regime(const std::string& s);

struct TrainConfig {
  Regime regime = Regime::kClassifier;
  OptimizerConfig optimizer;
  int batch_size = 64;
  int epochs = 5;
  std::uint64_t seed = 0;
  /// Clear/hazy loss trade-off; set for dehazer_m3 only.
  std::optional<double> lambda;
  /// Square side every input is resized to before batching.
  int input_size = 224;
  /// Joint fine-tuning rejects either flag.
  bool freeze_dehazer = false;
  bool freeze_classifier = false;

  /// Adam lr 1e-3, wd 5e-4, batch 64, 10 epochs.
  static TrainConfig classifier_default();
  /// SGD momentum 0.9, lr 1e-3, wd 1e-4, clip [-0.1, 0.1], batch 64, 5 epochs.
  static TrainConfig dehazer_default(Regime regime);
  /// As the dehazer recipe with lr 1e-4, 5 epochs.
  static TrainConfig joint_default();

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStat {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  std::optional<double> accuracy;
};

struct TrainReport {
  std::vector<EpochStat> curve;
  nlohmann::json final_metrics = nlohmann::json::object();
  double elapsed_seconds = 0.0;
  nlohmann::json config = nlohmann::json::object();
  std::string checkpoint_path;
  int best_epoch = 0;
  std::int64_t steps = 0;

  nlohmann::json to_json() const;
  /// `epoch,split,loss,accuracy`; accuracy is empty for dehazer runs.
  std::string curve_csv() const;
  /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
  void write(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Called after every optimizer step with the running step count and the
/// batch loss. Used by tests to instrument training.
using StepHook = std::function<void(std::int64_t step, double loss,
                                    const OptimizerState<float>& state)>;

/// Classifier matching a square input side: the full network at 224, the
/// reduced variant otherwise.
ClassifierSpec classifier_spec_for(int input_size);

/// In-memory labeled batch source: images resized to one square size.
struct LabeledSet {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> paths;
  std::size_t size() const noexcept { return images.size(); }
};

LabeledSet load_labeled(const Manifest& m, int input_size);

template <typename T>
Tensor4<T> gather_batch(const std::vector<Image>& images,
                        std::span<const std::size_t> indices);

/// Minibatch index lists for one epoch. Shuffled from (seed, epoch); a
/// trailing batch of one sample is dropped since batchnorm needs two.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size,
                                                    std::uint64_t seed, int epoch,
                                                    bool shuffle = true);

struct ClassifierRun {
  ClassifierNet<float> net;
  TrainReport report;
};

/// Cross-entropy training. Returns the checkpoint with the best validation
/// accuracy (earliest epoch on ties), or the last epoch when `val` is empty.
/// Throws DataError when the training set lacks one of the classes.
ClassifierRun train_classifier(const Manifest& train, const Manifest& val,
                               const TrainConfig& cfg, StepHook hook = {});

/// Dehazer training pair: an input record and the record whose image is the
/// target. Clear inputs are their own target.
struct DehazeSample {
  std::filesystem::path input;
  std::filesystem::path target;
  int y = 0;  // 1 = clear input, 0 = hazy input
};

/// Every hazy record once and every clear record once per epoch, so each
/// source contributes one clear image per |grid| hazy variants. Model 1
/// plans contain no clear records. Throws DataError when a hazy record has
/// no `target=` tag.
std::vector<DehazeSample> clear_ratio_schedule(const Manifest& corpus, Regime regime);

struct DehazerRun {
  DehazeNet<float> net;
  TrainReport report;
};

/// Models 1-3. MSE against the paired clear image (or the input itself for
/// clear inputs); Model 3 weights each sample by lambda (clear) or 1 - lambda (hazy).
DehazerRun train_dehazer(const Manifest& corpus, const TrainConfig& cfg,
                         DehazeSpec spec = {}, StepHook hook = {});

struct PipelineRun {
  PipelineNet<float> net;
  TrainReport report;
};

/// End-to-end cross-entropy through dehazer and classifier. Both subnets
/// always train; freeze flags throw ConfigError.
PipelineRun joint_finetune(DehazeNet<float> dehazer, ClassifierNet<float> classifier,
                           const Manifest& hazy_train, const TrainConfig& cfg,
                           StepHook hook = {});

}  // namespace hazepark

#endif  // HAZEPARK_TRAINING_HPP_
