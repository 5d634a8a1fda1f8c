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

#include "hazepark/scatter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hazepark/error.hpp"

namespace hazepark {

namespace {

void check_aligned(int h, int w, const TransmissionMap& t) {
  if (h != t.height() || w != t.width()) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " vs transmission " + std::to_string(t.height()) + "x" +
                     std::to_string(t.width()));
  }
}

int pixel_count(std::size_t size, int channels, const TransmissionMap& t) {
  const std::size_t pixels = static_cast<std::size_t>(t.height()) * t.width();
  if (channels < 1 || size != pixels * channels) {
    throw ShapeError("buffer size does not match transmission map");
  }
  return static_cast<int>(pixels);
}

std::vector<double> widen(const Image& img) {
  auto src = img.data();
  return std::vector<double>(src.begin(), src.end());
}

}  // namespace

void HazeParams::validate() const {
  if (!(airlight >= 0.0 && airlight <= 1.0)) {
    throw DomainError("atmospheric light must lie in [0,1], got " +
                      std::to_string(airlight));
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("scattering coefficient must be >= 0, got " +
                      std::to_string(beta));
  }
}

TransmissionMap::TransmissionMap(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1 ||
      data_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("transmission map dims do not match data");
  }
}

TransmissionMap transmission(const DepthMap& depth, const HazeParams& params) {
  params.validate();
  auto d = depth.data();
  std::vector<double> t(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    // Underflow to 0 would break the (0,1] invariant.
    t[i] = std::max(std::exp(-params.beta * static_cast<double>(d[i])),
                    std::numeric_limits<double>::min());
  }
  return TransmissionMap(depth.height(), depth.width(), std::move(t));
}

std::vector<double> synthesize_haze(std::span<const double> clear, int channels,
                                    const TransmissionMap& t,
                                    const HazeParams& params) {
  params.validate();
  const int pixels = pixel_count(clear.size(), channels, t);
  auto tv = t.data();
  std::vector<double> hazy(clear.size());
  for (int p = 0; p < pixels; ++p) {
    const double tp = tv[p];
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(p) * channels + c;
      hazy[i] = clear[i] * tp + params.airlight * (1.0 - tp);
    }
  }
  return hazy;
}

Image synthesize_haze(const Image& clear, const TransmissionMap& t,
                      const HazeParams& params) {
  check_aligned(clear.height(), clear.width(), t);
  const auto hazy = synthesize_haze(widen(clear), clear.channels(), t, params);
  std::vector<float> out(hazy.size());
  std::transform(hazy.begin(), hazy.end(), out.begin(), [](double v) {
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
  });
  return Image(clear.height(), clear.width(), clear.channels(), std::move(out));
}

KMap k_ground_truth(std::span<const double> hazy, int channels,
                    const TransmissionMap& t, const HazeParams& params,
                    double b) {
  params.validate();
  const int pixels = pixel_count(hazy.size(), channels, t);
  auto tv = t.data();
  KMap k{t.height(), t.width(), channels, std::vector<double>(hazy.size())};
  const double a = params.airlight;
  for (int p = 0; p < pixels; ++p) {
    const double tp = tv[p];
    if (!(tp > 0.0)) {
      throw DomainError("transmission must be > 0 (pixel " + std::to_string(p) +
                        ")");
    }
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(p) * channels + c;
      const double in = hazy[i];
      double denom = in - 1.0;
      if (std::abs(denom) < kKDenominatorEpsilon) {
        denom = denom < 0.0 ? -kKDenominatorEpsilon : kKDenominatorEpsilon;
      }
      k.data[i] = ((in - a) / tp + (a - b)) / denom;
    }
  }
  return k;
}

KMap k_ground_truth(const Image& hazy, const TransmissionMap& t,
                    const HazeParams& params, double b) {
  check_aligned(hazy.height(), hazy.width(), t);
  return k_ground_truth(widen(hazy), hazy.channels(), t, params, b);
}

std::vector<double> recover(std::span<const double> hazy, const KMap& k,
                            double b) {
  if (hazy.size() != k.data.size()) {
    throw ShapeError("hazy buffer and K map differ in size");
  }
  std::vector<double> clear(hazy.size());
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    clear[i] = std::clamp(k.data[i] * hazy[i] - k.data[i] + b, 0.0, 1.0);
  }
  return clear;
}

Image recover(const Image& hazy, const KMap& k, double b) {
  if (hazy.height() != k.height || hazy.width() != k.width ||
      hazy.channels() != k.channels) {
    throw ShapeError("hazy image and K map differ in shape");
  }
  const auto clear = recover(widen(hazy), k, b);
  std::vector<float> out(clear.begin(), clear.end());
  return Image(hazy.height(), hazy.width(), hazy.channels(), std::move(out));
}

}  // namespace hazepark
