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

#include "hazepark/loss.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hazepark {

template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  std::vector<double> ones(static_cast<std::size_t>(pred.n()), 1.0);
  return weighted_mse_loss(pred, target, ones);
}

template <typename T>
LossResult<T> weighted_mse_loss(const Tensor4<T>& pred,
                                const Tensor4<T>& target,
                                std::span<const double> sample_weights) {
  require_shape(target.shape(), pred.shape(), "mse target");
  if (sample_weights.size() != static_cast<std::size_t>(pred.n())) {
    throw ShapeError("mse: one weight per sample required");
  }
  const std::size_t per = pred.shape().per_sample();
  const double denom = static_cast<double>(per) * pred.n();
  LossResult<T> r{0.0, Tensor4<T>(pred.shape())};
  for (int n = 0; n < pred.n(); ++n) {
    const double w = sample_weights[n];
    const T* p = pred.sample(n);
    const T* t = target.sample(n);
    T* g = r.grad.sample(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      sum += d * d;
      g[i] = static_cast<T>(2.0 * w * d / denom);
    }
    r.value += w * sum / denom;
  }
  return r;
}

template <typename T>
LossResult<T> cross_entropy(const Tensor4<T>& probs,
                            std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(probs.n())) {
    throw ShapeError("cross_entropy: one label per sample required");
  }
  const int classes = static_cast<int>(probs.shape().per_sample());
  LossResult<T> r{0.0, Tensor4<T>(probs.shape())};
  const double inv_n = 1.0 / probs.n();
  for (int n = 0; n < probs.n(); ++n) {
    const int label = labels[n];
    if (label < 0 || label >= classes) {
      throw ShapeError("cross_entropy: label " + std::to_string(label) +
                       " out of range");
    }
    const T* p = probs.sample(n);
    T* g = r.grad.sample(n);
    const double pl = std::max(static_cast<double>(p[label]),
                               std::numeric_limits<double>::min());
    r.value -= std::log(pl) * inv_n;
    for (int k = 0; k < classes; ++k) {
      g[k] = static_cast<T>((p[k] - (k == label ? 1.0 : 0.0)) * inv_n);
    }
  }
  return r;
}

double dehaze_loss_weight(int y, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
  }
  if (y != 0 && y != 1) {
    throw ConfigError("y must be 0 (hazy) or 1 (clear)");
  }
  return y * lambda + (1 - y) * (1.0 - lambda);
}

double weighted_dehaze_loss(double loss, int y, double lambda) {
  return dehaze_loss_weight(y, lambda) * loss;
}

template LossResult<float> mse_loss<float>(const Tensor4<float>&,
                                           const Tensor4<float>&);
template LossResult<double> mse_loss<double>(const Tensor4<double>&,
                                             const Tensor4<double>&);
template LossResult<float> weighted_mse_loss<float>(const Tensor4<float>&,
                                                    const Tensor4<float>&,
                                                    std::span<const double>);
template LossResult<double> weighted_mse_loss<double>(const Tensor4<double>&,
                                                      const Tensor4<double>&,
                                                      std::span<const double>);
template LossResult<float> cross_entropy<float>(const Tensor4<float>&,
                                                std::span<const int>);
template LossResult<double> cross_entropy<double>(const Tensor4<double>&,
                                                  std::span<const int>);

}  // namespace hazepark
