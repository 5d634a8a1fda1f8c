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

#include "hazepark/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "hazepark/codec.hpp"

namespace hazepark {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw FormatError("checkpoint: non-positive tensor dim");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::vector<int> dims_of(const Shape4& s) { return {s.n, s.c, s.h, s.w}; }

}  // namespace

const CheckpointTensor* Checkpoint::find(std::string_view name) const {
  auto it = std::find_if(tensors.begin(), tensors.end(),
                         [&](const CheckpointTensor& t) { return t.name == name; });
  return it == tensors.end() ? nullptr : &*it;
}

std::vector<std::uint8_t> save_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["architecture_id"] = ckpt.architecture_id;
  header["arch"] = ckpt.arch;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (element_count(t.shape) != t.data.size()) {
      throw FormatError("checkpoint: tensor " + t.name + " shape/data mismatch");
    }
    header["tensors"].push_back({{"name", t.name},
                                 {"dtype", "f32"},
                                 {"shape", t.shape},
                                 {"offset", offset}});
    offset += t.data.size() * 4;
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kCheckpointMagic.size() + 4 + text.size() + offset);
  out.insert(out.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : ckpt.tensors) {
    for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  const std::size_t prefix = kCheckpointMagic.size() + 4;
  if (bytes.size() < prefix) throw FormatError("checkpoint: truncated preamble");
  if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(),
                  bytes.begin())) {
    throw FormatError("checkpoint: bad magic");
  }
  const std::uint32_t header_len = get_u32(bytes.data() + kCheckpointMagic.size());
  if (bytes.size() < prefix + header_len) {
    throw FormatError("checkpoint: truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + prefix,
                                   bytes.begin() + prefix + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: header is not valid JSON: ") +
                      e.what());
  }

  const std::uint8_t* blobs = bytes.data() + prefix + header_len;
  const std::size_t blob_size = bytes.size() - prefix - header_len;
  Checkpoint ckpt;
  try {
    ckpt.architecture_id = header.at("architecture_id").get<std::string>();
    ckpt.arch = header.value("arch", nlohmann::json::object());
    ckpt.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
      CheckpointTensor t;
      t.name = entry.at("name").get<std::string>();
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw FormatError("checkpoint: unsupported dtype for " + t.name);
      }
      t.shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = element_count(t.shape);
      if (offset % 4 != 0 || offset > blob_size || count * 4 > blob_size - offset) {
        throw FormatError("checkpoint: tensor " + t.name + " out of range");
      }
      t.data.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        t.data[i] = std::bit_cast<float>(get_u32(blobs + offset + 4 * i));
      }
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return load_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, save_checkpoint(ckpt));
}

template <typename T>
std::vector<CheckpointTensor> export_tensors(std::span<const TensorRef<T>> state,
                                             std::string_view prefix) {
  std::vector<CheckpointTensor> out;
  out.reserve(state.size());
  for (const auto& ref : state) {
    CheckpointTensor t;
    t.name = std::string(prefix) + ref.name;
    t.shape = dims_of(ref.value->shape());
    t.data.assign(ref.value->data().begin(), ref.value->data().end());
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void import_tensors(const Checkpoint& ckpt, std::span<const TensorRef<T>> state,
                    std::string_view prefix) {
  for (const auto& ref : state) {
    const std::string name = std::string(prefix) + ref.name;
    const CheckpointTensor* t = ckpt.find(name);
    if (t == nullptr) throw FormatError("checkpoint: missing tensor " + name);
    if (t->shape != dims_of(ref.value->shape())) {
      throw FormatError("checkpoint: shape mismatch for " + name +
                        " (declared architecture expects " +
                        ref.value->shape().str() + ")");
    }
    std::transform(t->data.begin(), t->data.end(), ref.value->data().begin(),
                   [](float v) { return static_cast<T>(v); });
  }
}

template std::vector<CheckpointTensor> export_tensors<float>(
    std::span<const TensorRef<float>>, std::string_view);
template std::vector<CheckpointTensor> export_tensors<double>(
    std::span<const TensorRef<double>>, std::string_view);
template void import_tensors<float>(const Checkpoint&,
                                    std::span<const TensorRef<float>>,
                                    std::string_view);
template void import_tensors<double>(const Checkpoint&,
                                     std::span<const TensorRef<double>>,
                                     std::string_view);

}  // namespace hazepark
