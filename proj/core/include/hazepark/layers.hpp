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

// Layer kernels and the stateful layer objects the two networks are built
// from. Kernels are free functions; layer objects own parameters, gradients
// and whatever the backward pass needs from the forward pass.
//
// Output sizes follow the floor rule, out = (in + 2 * pad - k) / stride + 1,
// with no implicit padding anywhere.

#ifndef HAZEPARK_LAYERS_HPP_
#define HAZEPARK_LAYERS_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hazepark/tensor.hpp"

namespace hazepark {

enum class Mode { kTrain, kEval };

/// Floor-rule output size; throws ShapeError when it would be < 1.
int conv_output_size(int in, int kernel, int stride, int pad);

// ---- kernels ---------------------------------------------------------------

/// Cross-correlation. weight is (out_c, in_c, k, k), bias is (out_c, 1, 1, 1).
template <typename T>
Tensor4<T> conv_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                        const Tensor4<T>& bias, int stride, int pad);

template <typename T>
struct ConvGrads {
  Tensor4<T> grad_x;  // empty when not requested
  Tensor4<T> grad_w;
  Tensor4<T> grad_b;
};

template <typename T>
ConvGrads<T> conv_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                           const Tensor4<T>& grad_out, int stride, int pad,
                           bool need_grad_x = true);

template <typename T>
struct PoolResult {
  Tensor4<T> out;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x, int kernel, int stride);

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_out,
                            std::span<const std::uint32_t> argmax,
                            const Shape4& input_shape);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// Passes gradient where x > 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out);

/// x is flattened per sample in (c, h, w) order. weight is (out, in, 1, 1).
template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                      const Tensor4<T>& bias);

template <typename T>
ConvGrads<T> fc_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                         const Tensor4<T>& grad_out);

/// Row-wise softmax over the channel axis of an (N, C, 1, 1) tensor.
template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits);

/// Stacks along the channel axis. All inputs share N, H, W.
template <typename T>
Tensor4<T> concat_channels(std::span<const Tensor4<T>* const> xs);

/// Inverse of concat_channels for gradients.
template <typename T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& x,
                                       std::span<const int> channels);

/// Views of the running statistics a batchnorm layer owns.
template <typename T>
struct BatchNormStats {
  std::span<T> running_mean;
  std::span<T> running_var;
};

template <typename T>
struct BatchNormCache {
  Tensor4<T> x_hat;
  std::vector<T> inv_std;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Train mode normalizes with biased batch statistics over (N, H, W) and
/// folds them into the running stats as r = 0.9 r + 0.1 batch. Eval mode uses
/// the running stats. Train mode with N < 2 throws ConfigError.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, std::span<const T> gamma,
                             std::span<const T> shift,
                             BatchNormStats<T> stats, Mode mode,
                             BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_gamma;
  std::vector<T> grad_shift;
};

/// Backward of the train-mode transform (or eval-mode when `eval` is set).
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                     std::span<const T> gamma,
                                     const Tensor4<T>& grad_out,
                                     bool eval = false);

// ---- parameters ------------------------------------------------------------

/// A trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor4<T> value;
  Tensor4<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape4 shape)
      : name(std::move(n)), value(shape), grad(shape) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// Non-owning handle used by optimizers and checkpointing. `grad` is null
/// for buffers such as batchnorm running statistics.
template <typename T>
struct TensorRef {
  std::string name;
  Tensor4<T>* value = nullptr;
  Tensor4<T>* grad = nullptr;
};

using Rng = std::mt19937_64;

/// He-uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <typename T>
void he_uniform(Tensor4<T>& weight, int fan_in, Rng& rng);

// ---- layers ----------------------------------------------------------------

struct ConvConfig {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, ConvConfig config);

  const ConvConfig& config() const noexcept { return config_; }
  Shape4 output_shape(const Shape4& in) const;
  void init(Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& grad_out, bool need_grad_x = true);

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }
  void collect(std::vector<TensorRef<T>>& out);

 private:
  ConvConfig config_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor4<T> input_;
};

template <typename T>
class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(int kernel, int stride) : kernel_(kernel), stride_(stride) {}

  Shape4 output_shape(const Shape4& in) const;
  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& grad_out);

 private:
  int kernel_ = 2;
  int stride_ = 2;
  Shape4 input_shape_;
  std::vector<std::uint32_t> argmax_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& grad_out);

  Parameter<T>& gamma() noexcept { return gamma_; }
  Parameter<T>& shift() noexcept { return shift_; }
  Tensor4<T>& running_mean() noexcept { return running_mean_; }
  Tensor4<T>& running_var() noexcept { return running_var_; }

  /// Params first, then (when `with_buffers`) running statistics.
  void collect(std::vector<TensorRef<T>>& out, bool with_buffers);

 private:
  std::string name_;
  Parameter<T> gamma_;
  Parameter<T> shift_;
  Tensor4<T> running_mean_;
  Tensor4<T> running_var_;
  BatchNormCache<T> cache_;
  Mode last_mode_ = Mode::kEval;
};

template <typename T>
class Relu {
 public:
  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& grad_out);

 private:
  Tensor4<T> input_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }
  void init(Rng& rng);

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& grad_out);

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }
  void collect(std::vector<TensorRef<T>>& out);

 private:
  int in_ = 0;
  int out_ = 0;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor4<T> input_;
};

}  // namespace hazepark

#endif  // HAZEPARK_LAYERS_HPP_
