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

#ifndef HAZEPARK_OPTIM_HPP_
#define HAZEPARK_OPTIM_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hazepark/layers.hpp"

namespace hazepark {

enum class OptimizerKind { kSgdMomentum, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& s);

struct ClipRange {
  double lo = -0.1;
  double hi = 0.1;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;     // Adam only
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<ClipRange> clip;

  /// Adam, lr 1e-3, weight decay 5e-4, betas (0.9, 0.999).
  static OptimizerConfig classifier_default();
  /// SGD momentum 0.9, lr 1e-3, weight decay 1e-4, clip [-0.1, 0.1].
  static OptimizerConfig dehazer_default();
  /// As dehazer_default but lr 1e-4.
  static OptimizerConfig joint_default();
};

/// Moment buffers are matched to parameters by position and shape.
template <typename T>
struct OptimizerState {
  OptimizerConfig config;
  std::int64_t step_count = 0;
  bool initialized = false;
  std::vector<Tensor4<T>> first_moment;   // SGD velocity or Adam m
  std::vector<Tensor4<T>> second_moment;  // Adam v
  /// Largest |effective gradient| seen by the most recent step.
  double last_max_abs_grad = 0.0;
};

template <typename T>
void init_optimizer(OptimizerState<T>& state,
                    std::span<const TensorRef<T>> params);

/// Effective gradient g' = clip(g + wd * w); v = mu v + g'; w -= lr v.
template <typename T>
void sgd_momentum_step(OptimizerState<T>& state,
                       std::span<const TensorRef<T>> params);

/// Effective gradient as above, then bias-corrected Adam.
template <typename T>
void adam_step(OptimizerState<T>& state, std::span<const TensorRef<T>> params);

/// Dispatches on state.config.kind. Throws StateError when the state was
/// never initialized or does not match `params`.
template <typename T>
void optimizer_step(OptimizerState<T>& state,
                    std::span<const TensorRef<T>> params);

template <typename T>
void zero_grads(std::span<const TensorRef<T>> params);

}  // namespace hazepark

#endif  // HAZEPARK_OPTIM_HPP_
