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

// Atmospheric scattering physics.
//
//   hazy  I = J * t + A * (1 - t),        t = exp(-beta * d)
//   clear J = K * I - K + b,              K = ((I - A) / t + (A - b)) / (I - 1)
//
// Float64 routines operate on raw vectors so the round-trip identity can be
// checked well below float32 resolution; Image overloads wrap them.

#ifndef HAZEPARK_SCATTER_HPP_
#define HAZEPARK_SCATTER_HPP_

#include <span>
#include <vector>

#include "hazepark/image.hpp"

namespace hazepark {

/// Global atmospheric light (scalar, shared by all channels) and scattering
/// coefficient.
struct HazeParams {
  double airlight = 1.0;
  double beta = 0.0;

  /// Throws DomainError unless 0 <= airlight <= 1 and beta >= 0.
  void validate() const;
};

/// Per-pixel transmission, every entry in (0,1].
class TransmissionMap {
 public:
  TransmissionMap() = default;
  TransmissionMap(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  double at(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const double> data() const noexcept { return data_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Per-pixel, per-channel K. Channel-interleaved like Image.
struct KMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;
};

/// Denominator clamp for K where |I - 1| is tiny.
inline constexpr double kKDenominatorEpsilon = 1e-6;

TransmissionMap transmission(const DepthMap& depth, const HazeParams& params);

/// I = J t + A (1 - t), clamped to [0,1]. Shape mismatch -> ShapeError.
Image synthesize_haze(const Image& clear, const TransmissionMap& t,
                      const HazeParams& params);

/// Float64 variant, unclamped. `clear` is channel-interleaved H x W x C.
std::vector<double> synthesize_haze(std::span<const double> clear, int channels,
                                    const TransmissionMap& t,
                                    const HazeParams& params);

/// Ground-truth K for a hazy image. Throws DomainError if any t <= 0.
KMap k_ground_truth(const Image& hazy, const TransmissionMap& t,
                    const HazeParams& params, double b = 1.0);
KMap k_ground_truth(std::span<const double> hazy, int channels,
                    const TransmissionMap& t, const HazeParams& params,
                    double b = 1.0);

/// J = K I - K + b, clamped to [0,1].
Image recover(const Image& hazy, const KMap& k, double b = 1.0);

/// Float64 variant; clamps to [0,1] like the Image overload.
std::vector<double> recover(std::span<const double> hazy, const KMap& k,
                            double b = 1.0);

}  // namespace hazepark

#endif  // HAZEPARK_SCATTER_HPP_
