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


// Random tensors and the central finite-difference oracle. Free of any test
// framework so the acceptance runner can share it.

#ifndef HAZEPARK_TESTS_FD_ORACLE_HPP_
#define HAZEPARK_TESTS_FD_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "hazepark/image.hpp"
#include "hazepark/layers.hpp"
#include "hazepark/tensor.hpp"

namespace hazepark::testutil {

template <typename T>
Tensor4<T> random_tensor(Shape4 shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

/// Values bounded away from zero, for ReLU kinks.
inline Tensor4<double> random_nonzero(Shape4 shape, Rng& rng) {
  Tensor4<double> t(shape);
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

/// Distinct values (a shuffled ramp) so max pooling has no ties.
inline Tensor4<double> random_distinct(Shape4 shape, Rng& rng) {
  Tensor4<double> t(shape);
  std::vector<double> ramp(t.size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.01 * static_cast<double>(i);
  std::shuffle(ramp.begin(), ramp.end(), rng);
  std::copy(ramp.begin(), ramp.end(), t.data().begin());
  return t;
}

inline Image random_image(int h, int w, int c, Rng& rng) {
  Image img(h, w, c);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

inline constexpr double kFdStep = 1e-4;
inline constexpr double kFdTolerance = 1e-5;

/// |a - n| / max(|a|, |n|), or the absolute gap when both are ~0.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

/// Central differences of `loss` with respect to every element of `x`,
/// compared against `analytic`. Returns the worst relative error.
inline double max_fd_error(Tensor4<double>& x, const Tensor4<double>& analytic,
                           const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = loss();
    x[i] = saved - kFdStep;
    const double down = loss();
    x[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * kFdStep)));
  }
  return worst;
}

/// As max_fd_error, for whole networks where some ReLU or clamp input may
/// sit within the step of its kink. An element that fails at the standard
/// step is re-measured at step / 100; if it passes there it counts as a kink
/// element in `*kinks` instead of an error.
inline double max_fd_error_smooth(Tensor4<double>& x, const Tensor4<double>& analytic,
                                  const std::function<double()>& loss, std::size_t* kinks) {
  auto central = [&](std::size_t i, double step) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    return (up - down) / (2 * step);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double err = relative_error(analytic[i], central(i, kFdStep));
    if (err >= kFdTolerance) {
      const double fine = relative_error(analytic[i], central(i, kFdStep / 100));
      if (fine < kFdTolerance) {
        ++*kinks;
        err = fine;
      }
    }
    worst = std::max(worst, err);
  }
  return worst;
}

/// sum(out * weights): a scalar probe whose gradient w.r.t. out is `weights`.
inline double probe(const Tensor4<double>& out, const Tensor4<double>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

}  // namespace hazepark::testutil

#endif  // HAZEPARK_TESTS_FD_ORACLE_HPP_
