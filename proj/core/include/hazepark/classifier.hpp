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

#ifndef HAZEPARK_CLASSIFIER_HPP_
#define HAZEPARK_CLASSIFIER_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/checkpoint.hpp"
#include "hazepark/layers.hpp"

namespace hazepark {

inline constexpr std::string_view kClassifierArchId = "malexnet_mod_v1";
inline constexpr std::string_view kReducedClassifierArchId =
    "malexnet_mod_reduced_v1";

/// Class indices of the occupancy classifier.
inline constexpr int kFree = 0;
inline constexpr int kBusy = 1;

/// conv -> maxpool [-> batchnorm] -> relu
struct ConvStage {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  int pool_kernel = 3;
  int pool_stride = 2;
  bool batchnorm = true;

  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

/// Three conv stages followed by FC(hidden) + ReLU and FC(classes) + softmax.
/// No padding anywhere; FC input is flattened channel-major.
struct ClassifierSpec {
  int input_size = 224;
  std::array<ConvStage, 3> stages{};
  int fc_hidden = 48;
  int classes = 2;

  /// 16x11x11+4, 20x5x5+1, 30x3x3+1, each with 3x3+2 pooling; batchnorm on
  /// the first two stages; FC 48 then 2. Input 224x224x3.
  static ClassifierSpec modified_malexnet();

  /// Same layer kinds at a reduced input size (>= 32) for fast experiments.
  static ClassifierSpec reduced(int input_size);

  /// An 8x8 variant used for end-to-end gradient checks.
  static ClassifierSpec tiny();

  std::string architecture_id() const;
  /// Per-sample activation shapes (n = 1): conv/pool outputs of each stage,
  /// then flattened features, FC4 and FC5 outputs.
  std::vector<Shape4> shape_chain() const;
  std::size_t parameter_count() const;

  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

template <typename T>
class ClassifierNet {
 public:
  explicit ClassifierNet(ClassifierSpec spec = ClassifierSpec::modified_malexnet());

  const ClassifierSpec& spec() const noexcept { return spec_; }

  /// He-uniform weights, zero biases, unit/zero batchnorm affine.
  void init(std::uint64_t seed);
  void init(Rng& rng);

  /// Throws ShapeError unless x is N x 3 x input_size x input_size.
  Tensor4<T> forward_logits(const Tensor4<T>& x, Mode mode);
  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);

  /// Backward from d(loss)/d(logits); accumulates parameter gradients and
  /// returns d(loss)/d(input).
  Tensor4<T> backward(const Tensor4<T>& grad_logits);

  std::vector<TensorRef<T>> parameters();
  /// Parameters plus batchnorm running statistics.
  std::vector<TensorRef<T>> state();
  void zero_grad();

  /// Activation shapes recorded by the most recent forward.
  const std::vector<Shape4>& trace() const noexcept { return trace_; }

  /// Eval-mode probabilities for one patch.
  std::array<double, 2> predict(const Image& patch);

  Checkpoint to_checkpoint(const nlohmann::json& meta = {}) const;
  static ClassifierNet from_checkpoint(const Checkpoint& ckpt);

 private:
  ClassifierSpec spec_;
  std::array<Conv2d<T>, 3> convs_;
  std::array<MaxPool2d<T>, 3> pools_;
  std::array<BatchNorm2d<T>, 3> norms_;
  std::array<Relu<T>, 4> relus_;
  Linear<T> fc4_;
  Linear<T> fc5_;
  std::vector<Shape4> trace_;
};

/// Argmax with ties resolved to class 0 (free).
int predicted_class(const std::array<double, 2>& probs);

}  // namespace hazepark

#endif  // HAZEPARK_CLASSIFIER_HPP_
