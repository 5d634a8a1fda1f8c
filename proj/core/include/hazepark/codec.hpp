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

#ifndef HAZEPARK_CODEC_HPP_
#define HAZEPARK_CODEC_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hazepark/image.hpp"

namespace hazepark {

/// Decodes an 8-bit PNG or JPEG stream. Values are raw / 255. Gray stays
/// single-channel; alpha is dropped. Throws DecodeError on malformed input.
Image decode_image(std::span<const std::uint8_t> bytes);

/// Lossless 8-bit PNG. Values are clamped and rounded to the nearest level.
std::vector<std::uint8_t> encode_png(const Image& img);

std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality = 95);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace hazepark

#endif  // HAZEPARK_CODEC_HPP_
