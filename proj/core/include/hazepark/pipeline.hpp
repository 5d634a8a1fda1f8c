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


// Serial dehaze -> classify model, trainable end to end.

#ifndef HAZEPARK_PIPELINE_HPP_
#define HAZEPARK_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "hazepark/checkpoint.hpp"
#include "hazepark/classifier.hpp"
#include "hazepark/dehazer.hpp"

namespace hazepark {

inline constexpr std::string_view kPipelineArchId = "pipeline_v1";

template <typename T>
class PipelineNet {
 public:
  PipelineNet(DehazeNet<T> dehazer, ClassifierNet<T> classifier);
  PipelineNet(DehazeSpec dehaze_spec, ClassifierSpec classifier_spec);

  DehazeNet<T>& dehazer() noexcept { return dehazer_; }
  ClassifierNet<T>& classifier() noexcept { return classifier_; }
  int input_size() const noexcept { return classifier_.spec().input_size; }

  /// Seeds the dehazer and classifier from one stream, dehazer first.
  void init(std::uint64_t seed);

  Tensor4<T> forward_logits(const Tensor4<T>& x, Mode mode);
  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);

  /// Gradients flow through the classifier into the dehazer. Returns
  /// d(loss)/d(input).
  Tensor4<T> backward(const Tensor4<T>& grad_logits);

  /// Dehazer tensors are prefixed "dehaze.", classifier tensors "classify.".
  std::vector<TensorRef<T>> parameters();
  std::vector<TensorRef<T>> state();
  void zero_grad();

  std::array<double, 2> predict(const Image& patch);

  Checkpoint to_checkpoint(const nlohmann::json& meta = {}) const;
  static PipelineNet from_checkpoint(const Checkpoint& ckpt);

 private:
  DehazeNet<T> dehazer_;
  ClassifierNet<T> classifier_;
};

}  // namespace hazepark

#endif  // HAZEPARK_PIPELINE_HPP_
