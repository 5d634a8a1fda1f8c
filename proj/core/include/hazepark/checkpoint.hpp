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

// Checkpoint container.
//
//   bytes 0..7   "PHZCKPT1"
//   bytes 8..11  header length L, u32 little-endian
//   next L bytes UTF-8 JSON header:
//                {"architecture_id": ..., "arch": {...}, "meta": {...},
//                 "tensors": [{"name", "dtype": "f32", "shape": [...],
//                              "offset": <byte offset into blob section>}]}
//   remainder    concatenated little-endian IEEE-754 binary32 blobs
//
// Endianness is fixed, so files are bit-identical across platforms.

#ifndef HAZEPARK_CHECKPOINT_HPP_
#define HAZEPARK_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/layers.hpp"

namespace hazepark {

inline constexpr std::string_view kCheckpointMagic = "PHZCKPT1";

struct CheckpointTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string architecture_id;
  nlohmann::json arch = nlohmann::json::object();
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(std::string_view name) const;
};

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& ckpt);

/// Throws FormatError on bad magic, truncation or inconsistent offsets.
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Snapshots every tensor in `state` (parameters and buffers) as f32.
template <typename T>
std::vector<CheckpointTensor> export_tensors(
    std::span<const TensorRef<T>> state, std::string_view prefix = {});

/// Copies tensors back by name. Missing tensors or shape mismatches throw
/// FormatError.
template <typename T>
void import_tensors(const Checkpoint& ckpt, std::span<const TensorRef<T>> state,
                    std::string_view prefix = {});

}  // namespace hazepark

#endif  // HAZEPARK_CHECKPOINT_HPP_
