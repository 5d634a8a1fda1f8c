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


// Accuracy evaluation, dehazing diagnostics, runtime benchmarking and the
// model x dataset comparison grid.

#ifndef HAZEPARK_EVALUATE_HPP_
#define HAZEPARK_EVALUATE_HPP_

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/classifier.hpp"
#include "hazepark/datasets.hpp"
#include "hazepark/dehazer.hpp"
#include "hazepark/pipeline.hpp"

namespace hazepark {

/// Class probabilities {free, busy} for one patch.
using Predictor = std::function<std::array<double, 2>(const Image&)>;
/// Dehazed version of one image.
using Dehazer = std::function<Image(const Image&)>;

struct RecordError {
  std::string path;
  std::string message;
};

/// Positive class is busy (1).
struct EvalResult {
  std::string model_id;
  std::string dataset_id;
  double accuracy = 0.0;
  /// Accuracy restricted to free / busy samples; NaN when a class is absent.
  std::array<double, 2> per_class_accuracy{};
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t n_samples = 0;
  std::vector<RecordError> errors;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Runs `predict` on every record (resized to `input_size` square). Records
/// that fail to load are collected in `errors` and excluded from the counts.
EvalResult evaluate_classifier(const Predictor& predict, const Manifest& test,
                               int input_size, std::string model_id,
                               std::string dataset_id);
EvalResult evaluate_classifier(ClassifierNet<float>& net, const Manifest& test,
                               std::string model_id, std::string dataset_id);
EvalResult evaluate_classifier(PipelineNet<float>& net, const Manifest& test,
                               std::string model_id, std::string dataset_id);

struct DehazeQuality {
  double mean_mse = 0.0;
  double mean_psnr = 0.0;  // dB, each pair capped at 99
  std::size_t n_pairs = 0;
};

inline constexpr double kPsnrCap = 99.0;

double image_mse(const Image& a, const Image& b);
/// 10 log10(1 / mse) for [0,1] images, capped at 99 dB.
double psnr_from_mse(double mse);

/// Hazy records are compared with their `target=` clear image; clear
/// records with themselves. A hazy record without a target throws DataError.
/// `input_size` > 0 resizes both sides first.
DehazeQuality dehaze_quality(const Dehazer& dehaze, const Manifest& corpus,
                             int input_size = 0);
DehazeQuality dehaze_quality(DehazeNet<float>& net, const Manifest& corpus,
                             int input_size = 0);

struct BenchResult {
  std::string model_id;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;  // sample standard deviation, 0 for one sample
  double min_seconds = 0.0;
  double max_seconds = 0.0;
  std::size_t n_patches = 0;
  std::size_t n_warmup = 0;
  std::string hardware;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// CPU model and logical core count, best effort.
std::string hardware_note();

/// Decodes and resizes every patch up front, runs `n_warmup` untimed calls,
/// then times `n_timed` single-patch calls (cycling through the patches)
/// with a monotonic clock. Throws DataError on an empty manifest.
BenchResult bench_runtime(const std::function<void(const Image&)>& forward,
                          const Manifest& patches, int input_size, int n_warmup,
                          int n_timed, std::string model_id);

/// Model x column grid: one column per dataset (accuracy) plus a
/// `latency_s` column when bench results are given. Rows sorted by model.
struct ComparisonTable {
  std::vector<std::string> models;
  std::vector<std::string> columns;
  /// cells[row][col]; NaN where no result exists.
  std::vector<std::vector<double>> cells;

  std::string to_csv() const;
  std::string to_markdown() const;
};

/// Throws InputError when no results are given or a (model, dataset) pair
/// repeats.
ComparisonTable compare_models(std::span<const EvalResult> evals,
                               std::span<const BenchResult> benches = {});

}  // namespace hazepark

#endif  // HAZEPARK_EVALUATE_HPP_
