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


#include "hazepark/occupancy.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>

#include "hazepark/codec.hpp"

namespace hazepark {

namespace {

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::is_regular_file(p)) {
    throw ConfigError(std::string(what) + " not found: " + p.string());
  }
}

std::string id_of(const Checkpoint& ckpt, const std::filesystem::path& p) {
  const auto& meta = ckpt.meta;
  if (meta.is_object() && meta.contains("model_id") && meta["model_id"].is_string()) {
    return meta["model_id"].get<std::string>();
  }
  return p.stem().string();
}

}  // namespace

void PipelineConfig::validate() const {
  if (mask.empty()) throw ConfigError("pipeline needs a slot mask");
  require_file(mask, "slot mask");
  if (classifier_checkpoint.has_value() == pipeline_checkpoint.has_value()) {
    throw ConfigError("give exactly one of a classifier or a pipeline checkpoint");
  }
  if (pipeline_checkpoint && dehazer_checkpoint) {
    throw ConfigError("a pipeline checkpoint already contains its dehazer");
  }
  if (classifier_checkpoint) require_file(*classifier_checkpoint, "classifier checkpoint");
  if (pipeline_checkpoint) require_file(*pipeline_checkpoint, "pipeline checkpoint");
  if (dehazer_checkpoint) require_file(*dehazer_checkpoint, "dehazer checkpoint");
  if (dehaze_frame && !dehazer_checkpoint && !pipeline_checkpoint) {
    throw ConfigError("frame-level dehazing needs a dehazer");
  }
  if (output.empty()) throw ConfigError("pipeline needs an output path");
}

nlohmann::json PipelineConfig::to_json() const {
  auto opt = [](const std::optional<std::filesystem::path>& p) {
    return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
  };
  return {{"mask", mask.string()},
          {"dehazer_checkpoint", opt(dehazer_checkpoint)},
          {"classifier_checkpoint", opt(classifier_checkpoint)},
          {"pipeline_checkpoint", opt(pipeline_checkpoint)},
          {"frames", frames},
          {"output", output.string()},
          {"dehaze_frame", dehaze_frame}};
}

nlohmann::json OccupancyReport::to_json() const {
  nlohmann::json slots_json = nlohmann::json::array();
  for (const auto& s : slots) {
    slots_json.push_back(
        {{"slot_id", s.slot_id}, {"occupied", s.occupied}, {"confidence", s.confidence}});
  }
  return {{"frame", frame},
          {"slots", slots_json},
          {"counts", {{"free", free_count}, {"busy", busy_count}}},
          {"timestamp", timestamp},
          {"model_id", model_id}};
}

OccupancyRunner::OccupancyRunner(const PipelineConfig& cfg)
    : dehaze_frame_(cfg.dehaze_frame) {
  cfg.validate();
  mask_ = read_slot_mask(cfg.mask);
  if (cfg.pipeline_checkpoint) {
    const Checkpoint ckpt = read_checkpoint(*cfg.pipeline_checkpoint);
    pipeline_ = PipelineNet<float>::from_checkpoint(ckpt);
    model_id_ = id_of(ckpt, *cfg.pipeline_checkpoint);
  } else {
    const Checkpoint ckpt = read_checkpoint(*cfg.classifier_checkpoint);
    classifier_ = ClassifierNet<float>::from_checkpoint(ckpt);
    model_id_ = id_of(ckpt, *cfg.classifier_checkpoint);
  }
  if (cfg.dehazer_checkpoint) {
    const Checkpoint ckpt = read_checkpoint(*cfg.dehazer_checkpoint);
    dehazer_ = DehazeNet<float>::from_checkpoint(ckpt);
    model_id_ = id_of(ckpt, *cfg.dehazer_checkpoint) + "+" + model_id_;
  }
}

int OccupancyRunner::patch_size() const noexcept {
  return pipeline_ ? pipeline_->input_size() : classifier_->spec().input_size;
}

std::array<double, 2> OccupancyRunner::classify(const Image& patch) {
  if (pipeline_) {
    if (dehaze_frame_) return pipeline_->classifier().predict(patch);
    return pipeline_->predict(patch);
  }
  if (dehazer_ && !dehaze_frame_) {
    return classifier_->predict(dehaze_forward(*dehazer_, patch).clean);
  }
  return classifier_->predict(patch);
}

OccupancyReport OccupancyRunner::process(const Image& frame, const std::string& frame_name) {
  Image source = to_rgb(frame);
  if (dehaze_frame_) {
    DehazeNet<float>& net = pipeline_ ? pipeline_->dehazer() : *dehazer_;
    source = dehaze_forward(net, source).clean;
  }
  OccupancyReport report;
  report.frame = frame_name;
  report.model_id = model_id_;
  for (const auto& sp : extract_slots(source, mask_, patch_size())) {
    const auto p = classify(sp.patch);
    const int cls = predicted_class(p);
    report.slots.push_back({sp.slot_id, cls == kBusy, std::max(p[0], p[1])});
    cls == kBusy ? ++report.busy_count : ++report.free_count;
  }
  report.timestamp = utc_now();
  return report;
}

std::vector<std::filesystem::path> expand_frames(std::span<const std::string> patterns) {
  std::vector<std::filesystem::path> out;
  for (const auto& pat : patterns) {
    if (pat.find_first_of("*?[") == std::string::npos) {
      out.emplace_back(pat);
      continue;
    }
    glob_t g{};
    const int rc = ::glob(pat.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      std::vector<std::filesystem::path> matches(g.gl_pathv, g.gl_pathv + g.gl_pathc);
      std::sort(matches.begin(), matches.end());
      out.insert(out.end(), matches.begin(), matches.end());
    }
    globfree(&g);
  }
  return out;
}

void append_line_atomic(const std::filesystem::path& path, const std::string& line) {
  std::string content;
  if (std::filesystem::exists(path)) {
    const auto bytes = read_file(path);
    content.assign(bytes.begin(), bytes.end());
    if (!content.empty() && content.back() != '\n') content.push_back('\n');
  }
  content += line;
  content.push_back('\n');
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, std::span(reinterpret_cast<const std::uint8_t*>(content.data()),
                            content.size()));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

PipelineRunResult run_pipeline(const PipelineConfig& cfg) {
  OccupancyRunner runner(cfg);
  PipelineRunResult result;
  for (const auto& frame_path : expand_frames(cfg.frames)) {
    Image frame;
    try {
      frame = read_image(frame_path);
    } catch (const Error& e) {
      std::cerr << "warning: skipping frame " << frame_path.string() << ": " << e.what()
                << "\n";
      result.failures.push_back({frame_path.string(), e.what()});
      continue;
    }
    OccupancyReport report = runner.process(frame, frame_path.string());
    append_line_atomic(cfg.output, report.to_json().dump());
    result.reports.push_back(std::move(report));
  }
  return result;
}

}  // namespace hazepark
