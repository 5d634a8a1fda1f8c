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


// Frame-level occupancy detection: slot extraction, optional dehazing,
// classification and per-frame aggregation into newline-delimited JSON
// reports.

#ifndef HAZEPARK_OCCUPANCY_HPP_
#define HAZEPARK_OCCUPANCY_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/classifier.hpp"
#include "hazepark/datasets.hpp"
#include "hazepark/dehazer.hpp"
#include "hazepark/pipeline.hpp"

namespace hazepark {

struct PipelineConfig {
  std::filesystem::path mask;
  /// Absent means the bare classifier runs on raw patches.
  std::optional<std::filesystem::path> dehazer_checkpoint;
  /// Exactly one of the two below.
  std::optional<std::filesystem::path> classifier_checkpoint;
  std::optional<std::filesystem::path> pipeline_checkpoint;
  /// Frame paths or glob patterns.
  std::vector<std::string> frames;
  std::filesystem::path output;
  /// Dehaze the whole frame once before segmentation instead of per patch.
  bool dehaze_frame = false;

  /// Throws ConfigError on missing files or conflicting model choices.
  void validate() const;
  nlohmann::json to_json() const;
};

struct SlotResult {
  std::string slot_id;
  bool occupied = false;
  double confidence = 0.0;  // max class probability
};

struct OccupancyReport {
  std::string frame;
  std::vector<SlotResult> slots;
  int free_count = 0;
  int busy_count = 0;
  std::string timestamp;  // UTC, ISO 8601
  std::string model_id;

  nlohmann::json to_json() const;
};

/// Loaded mask and models, ready to process frames.
class OccupancyRunner {
 public:
  explicit OccupancyRunner(const PipelineConfig& cfg);

  const std::string& model_id() const noexcept { return model_id_; }
  int patch_size() const noexcept;

  OccupancyReport process(const Image& frame, const std::string& frame_name);

 private:
  std::array<double, 2> classify(const Image& patch);

  SlotMask mask_;
  std::optional<DehazeNet<float>> dehazer_;
  std::optional<ClassifierNet<float>> classifier_;
  std::optional<PipelineNet<float>> pipeline_;
  bool dehaze_frame_ = false;
  std::string model_id_;
};

struct FrameFailure {
  std::string frame;
  std::string message;
};

struct PipelineRunResult {
  std::vector<OccupancyReport> reports;
  std::vector<FrameFailure> failures;
};

/// Sorted matches of each glob pattern; literal paths pass through as-is.
std::vector<std::filesystem::path> expand_frames(std::span<const std::string> patterns);

/// Appends `line` plus a newline to `path` through a temp file and rename.
void append_line_atomic(const std::filesystem::path& path, const std::string& line);

/// Processes every frame, appending one JSON line per frame to cfg.output.
/// Frames that fail to decode are reported in `failures` and skipped.
PipelineRunResult run_pipeline(const PipelineConfig& cfg);

}  // namespace hazepark

#endif  // HAZEPARK_OCCUPANCY_HPP_
