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

#include "hazepark/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hazepark/error.hpp"

namespace hazepark {

namespace {

void check_dims(int height, int width, int channels) {
  if (height < 1 || width < 1) {
    throw ShapeError("image dims must be >= 1, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw ShapeError("image channels must be 1 or 3, got " +
                     std::to_string(channels));
  }
}

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("image data size does not match dims");
  }
}

void Image::clamp01() {
  for (float& v : data_) {
    v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  }
}

DepthMap::DepthMap(int height, int width, float fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("depth dims must be >= 1");
  if (!(fill >= 0.0f) || !std::isfinite(fill)) {
    throw DomainError("depth must be finite and >= 0");
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

DepthMap::DepthMap(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) throw ShapeError("depth dims must be >= 1");
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("depth data size does not match dims");
  }
  for (float d : data_) {
    if (!(d >= 0.0f) || !std::isfinite(d)) {
      throw DomainError("depth must be finite and >= 0");
    }
  }
}

Image resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("resize target must be >= 1x1");
  }
  if (out_h == img.height() && out_w == img.width()) return img;

  const int channels = img.channels();
  Image out(out_h, out_w, channels);
  const double sy =
      out_h > 1 ? static_cast<double>(img.height() - 1) / (out_h - 1) : 0.0;
  const double sx =
      out_w > 1 ? static_cast<double>(img.width() - 1) / (out_w - 1) : 0.0;

  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < channels; ++c) {
        const float top =
            img.at(y0, x0, c) + wx * (img.at(y0, x1, c) - img.at(y0, x0, c));
        const float bottom =
            img.at(y1, x0, c) + wx * (img.at(y1, x1, c) - img.at(y1, x0, c));
        out.at(y, x, c) = std::clamp(top + wy * (bottom - top), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Image crop(const Image& img, int top, int left, int h, int w) {
  if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > img.height() ||
      left + w > img.width()) {
    throw RangeError("crop window (" + std::to_string(top) + "," +
                     std::to_string(left) + "," + std::to_string(h) + "," +
                     std::to_string(w) + ") outside " +
                     std::to_string(img.height()) + "x" +
                     std::to_string(img.width()) + " image");
  }
  const int channels = img.channels();
  Image out(h, w, channels);
  auto src = img.data();
  auto dst = out.data();
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  for (int y = 0; y < h; ++y) {
    const std::size_t from =
        (static_cast<std::size_t>(top + y) * img.width() + left) * channels;
    std::copy_n(src.begin() + from, row, dst.begin() + y * row);
  }
  return out;
}

Image flip_h(const Image& img) {
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, img.width() - 1 - x, c) = img.at(y, x, c);
      }
    }
  }
  return out;
}

Image flip_v(const Image& img) {
  Image out(img.height(), img.width(), img.channels());
  const std::size_t row = static_cast<std::size_t>(img.width()) * img.channels();
  auto src = img.data();
  auto dst = out.data();
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(src.begin() + y * row, row,
                dst.begin() + (img.height() - 1 - y) * row);
  }
  return out;
}

Image to_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float v = img.at(y, x, 0);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  }
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data()) {
    const float c = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    v = std::round(c * 255.0f) / 255.0f;
  }
  return out;
}

}  // namespace hazepark
