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

#ifndef HAZEPARK_LOSS_HPP_
#define HAZEPARK_LOSS_HPP_

#include <span>

#include "hazepark/tensor.hpp"

namespace hazepark {

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor4<T> grad;
};

/// Mean of squared differences over every element.
template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

/// Batch mean of per-sample MSE scaled by `sample_weights[n]`. With all
/// weights 1 this equals mse_loss.
template <typename T>
LossResult<T> weighted_mse_loss(const Tensor4<T>& pred,
                                const Tensor4<T>& target,
                                std::span<const double> sample_weights);

/// Mean over the batch of -ln p[label]. The gradient is taken with respect
/// to the logits that produced `probs` through softmax: (p - onehot) / N.
template <typename T>
LossResult<T> cross_entropy(const Tensor4<T>& probs, std::span<const int> labels);

/// Weight the dehazer loss receives for one sample: lambda for clear inputs
/// (y = 1), 1 - lambda for hazy inputs (y = 0). Throws ConfigError when
/// lambda is outside [0,1] or y is not 0/1.
double dehaze_loss_weight(int y, double lambda);

/// L1 = y * lambda * L + (1 - y) * (1 - lambda) * L.
double weighted_dehaze_loss(double loss, int y, double lambda);

}  // namespace hazepark

#endif  // HAZEPARK_LOSS_HPP_
