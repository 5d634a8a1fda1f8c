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

// K-estimation dehazer.
//
//   c1 = relu(conv1(I))
//   c2 = relu(conv2(c1))
//   c3 = relu(conv3([c1, c2]))
//   c4 = relu(conv4([c1, c2, c3]))
//   K  = relu(conv5([c1, c2, c3, c4]))
//   J  = clamp(K * I - K + b, 0, 1)
//
// Every conv is "same" padded, so the network preserves spatial size.

#ifndef HAZEPARK_DEHAZER_HPP_
#define HAZEPARK_DEHAZER_HPP_

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/checkpoint.hpp"
#include "hazepark/layers.hpp"
#include "hazepark/scatter.hpp"

namespace hazepark {

inline constexpr std::string_view kDehazerArchId = "aodnet_v1";

struct DehazeHeadConfig {
  double b = 1.0;
  friend bool operator==(const DehazeHeadConfig&, const DehazeHeadConfig&) = default;
};

struct DehazeSpec {
  /// Output channels of conv1..conv4; conv5 always emits 3 (K per channel).
  std::array<int, 4> widths{3, 3, 3, 3};
  /// Odd kernel sizes of conv1..conv5; padding is kernel / 2.
  std::array<int, 5> kernels{1, 3, 5, 7, 3};
  DehazeHeadConfig head;

  /// Smaller kernels for end-to-end gradient checks on 8x8 inputs.
  static DehazeSpec tiny();

  nlohmann::json to_json() const;
  static DehazeSpec from_json(const nlohmann::json& j);

  friend bool operator==(const DehazeSpec&, const DehazeSpec&) = default;
};

template <typename T>
struct DehazeOutput {
  Tensor4<T> clean;
  Tensor4<T> k;
};

template <typename T>
class DehazeNet {
 public:
  explicit DehazeNet(DehazeSpec spec = {});

  const DehazeSpec& spec() const noexcept { return spec_; }

  /// He-uniform weights, zero biases except conv5, whose bias starts at 1
  /// so the untrained network is close to the identity map.
  void init(std::uint64_t seed);
  void init(Rng& rng);

  /// Throws ShapeError unless x is N x 3 x H x W with H, W >= 8.
  DehazeOutput<T> forward(const Tensor4<T>& x);

  /// Backward from d(loss)/d(clean). Returns d(loss)/d(input) when asked,
  /// otherwise an empty tensor.
  Tensor4<T> backward(const Tensor4<T>& grad_clean, bool need_grad_input = false);

  std::vector<TensorRef<T>> parameters();
  std::vector<TensorRef<T>> state() { return parameters(); }
  void zero_grad();

  Conv2d<T>& conv(int i) { return convs_.at(i); }

  Checkpoint to_checkpoint(const nlohmann::json& meta = {}) const;
  static DehazeNet from_checkpoint(const Checkpoint& ckpt);

 private:
  DehazeSpec spec_;
  std::array<Conv2d<T>, 5> convs_;
  std::array<Relu<T>, 5> relus_;
  Tensor4<T> input_;
  Tensor4<T> k_;
  Tensor4<T> raw_;  // K * I - K + b before clamping
};

struct DehazedImage {
  Image clean;
  KMap k;
};

/// Single-image convenience wrapper around DehazeNet<float>::forward.
DehazedImage dehaze_forward(DehazeNet<float>& net, const Image& hazy);

}  // namespace hazepark

#endif  // HAZEPARK_DEHAZER_HPP_
