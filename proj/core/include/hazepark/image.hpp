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

#ifndef HAZEPARK_IMAGE_HPP_
#define HAZEPARK_IMAGE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hazepark {

/// An H x W x C float image with values nominally in [0,1].
///
/// Storage is row-major and channel-interleaved: element (y, x, c) lives at
/// `(y * width + x) * channels + c`. Channels is 1 (gray) or 3 (RGB).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  /// Clamps every element into [0,1] in place. NaN becomes 0.
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Per-pixel scene distance, arbitrary length units, all entries >= 0.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width, float fill = 0.0f);
  DepthMap(int height, int width, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  float& at(int y, int x) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  float at(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const float> data() const noexcept { return data_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Bilinear resize with align-corners sampling: output row i samples source
/// row i * (in_h - 1) / (out_h - 1). A 1-pixel output axis samples index 0.
Image resize(const Image& img, int out_h, int out_w);

/// Exact sub-window copy. Throws RangeError when the window leaves the image.
Image crop(const Image& img, int top, int left, int h, int w);

Image flip_h(const Image& img);
Image flip_v(const Image& img);

/// Gray -> RGB by replication; RGB passes through unchanged.
Image to_rgb(const Image& img);

/// 8-bit quantization as it happens on a PNG round trip.
Image quantize8(const Image& img);

}  // namespace hazepark

#endif  // HAZEPARK_IMAGE_HPP_
