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

#include "hazepark/optim.hpp"

#include <algorithm>
#include <cmath>

namespace hazepark {

namespace {

template <typename T>
void check_state(const OptimizerState<T>& state,
                 std::span<const TensorRef<T>> params) {
  if (!state.initialized) throw StateError("optimizer state not initialized");
  if (state.first_moment.size() != params.size()) {
    throw StateError("optimizer state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad == nullptr) {
      throw StateError(params[i].name + " has no gradient");
    }
    if (!(state.first_moment[i].shape() == params[i].value->shape())) {
      throw StateError("moment shape mismatch for " + params[i].name);
    }
  }
}

template <typename T>
T effective_grad(const OptimizerConfig& cfg, T g, T w) {
  double e = static_cast<double>(g) + cfg.weight_decay * static_cast<double>(w);
  if (cfg.clip) e = std::clamp(e, cfg.clip->lo, cfg.clip->hi);
  return static_cast<T>(e);
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::kSgdMomentum;
  throw ConfigError("unknown optimizer '" + s + "'");
}

OptimizerConfig OptimizerConfig::classifier_default() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdam;
  c.lr = 1e-3;
  c.weight_decay = 5e-4;
  return c;
}

OptimizerConfig OptimizerConfig::dehazer_default() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kSgdMomentum;
  c.lr = 1e-3;
  c.weight_decay = 1e-4;
  c.momentum = 0.9;
  c.clip = ClipRange{-0.1, 0.1};
  return c;
}

OptimizerConfig OptimizerConfig::joint_default() {
  OptimizerConfig c = dehazer_default();
  c.lr = 1e-4;
  return c;
}

template <typename T>
void init_optimizer(OptimizerState<T>& state,
                    std::span<const TensorRef<T>> params) {
  state.first_moment.clear();
  state.second_moment.clear();
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value->shape());
    if (state.config.kind == OptimizerKind::kAdam) {
      state.second_moment.emplace_back(p.value->shape());
    }
  }
  state.step_count = 0;
  state.initialized = true;
}

template <typename T>
void sgd_momentum_step(OptimizerState<T>& state,
                       std::span<const TensorRef<T>> params) {
  check_state(state, params);
  const auto& cfg = state.config;
  const T mu = static_cast<T>(cfg.momentum);
  const T lr = static_cast<T>(cfg.lr);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->data();
    auto g = params[i].grad->data();
    auto v = state.first_moment[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const T e = effective_grad(cfg, g[j], w[j]);
      max_abs = std::max(max_abs, std::abs(static_cast<double>(e)));
      v[j] = mu * v[j] + e;
      w[j] -= lr * v[j];
    }
  }
  state.last_max_abs_grad = max_abs;
  ++state.step_count;
}

template <typename T>
void adam_step(OptimizerState<T>& state, std::span<const TensorRef<T>> params) {
  check_state(state, params);
  if (state.second_moment.size() != params.size()) {
    throw StateError("adam state missing second moments");
  }
  const auto& cfg = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value->data();
    auto g = params[i].grad->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const T e = effective_grad(cfg, g[j], w[j]);
      max_abs = std::max(max_abs, std::abs(static_cast<double>(e)));
      m[j] = b1 * m[j] + (T(1) - b1) * e;
      v[j] = b2 * v[j] + (T(1) - b2) * e * e;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= static_cast<T>(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
  state.last_max_abs_grad = max_abs;
}

template <typename T>
void optimizer_step(OptimizerState<T>& state,
                    std::span<const TensorRef<T>> params) {
  if (state.config.kind == OptimizerKind::kAdam) {
    adam_step(state, params);
  } else {
    sgd_momentum_step(state, params);
  }
}

template <typename T>
void zero_grads(std::span<const TensorRef<T>> params) {
  for (const auto& p : params) {
    if (p.grad != nullptr) p.grad->fill(T(0));
  }
}

#define HAZEPARK_INSTANTIATE(T)                                              \
  template void init_optimizer<T>(OptimizerState<T>&,                        \
                                  std::span<const TensorRef<T>>);            \
  template void sgd_momentum_step<T>(OptimizerState<T>&,                     \
                                     std::span<const TensorRef<T>>);         \
  template void adam_step<T>(OptimizerState<T>&,                             \
                             std::span<const TensorRef<T>>);                 \
  template void optimizer_step<T>(OptimizerState<T>&,                        \
                                  std::span<const TensorRef<T>>);            \
  template void zero_grads<T>(std::span<const TensorRef<T>>);

HAZEPARK_INSTANTIATE(float)
HAZEPARK_INSTANTIATE(double)

#undef HAZEPARK_INSTANTIATE

}  // namespace hazepark
