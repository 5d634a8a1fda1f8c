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

#ifndef HAZEPARK_TENSOR_HPP_
#define HAZEPARK_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hazepark/error.hpp"
#include "hazepark/image.hpp"

namespace hazepark {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t per_sample() const noexcept {
    return static_cast<std::size_t>(c) * h * w;
  }
  std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense NCHW tensor. Fully connected activations use h = w = 1.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape) {
    if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1) {
      throw ShapeError("tensor dims must be >= 1, got " + shape.str());
    }
    data_.assign(shape.count(), fill);
  }
  Tensor4(int n, int c, int h, int w, T fill = T(0))
      : Tensor4(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int n, int c, int y, int x) {
    return data_[index(n, c, y, x)];
  }
  T operator()(int n, int c, int y, int x) const {
    return data_[index(n, c, y, x)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  /// Pointer to the first element of sample `n`.
  T* sample(int n) noexcept { return data_.data() + n * shape_.per_sample(); }
  const T* sample(int n) const noexcept {
    return data_.data() + n * shape_.per_sample();
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }

  Shape4 shape_;
  std::vector<T> data_;
};

inline void require_shape(const Shape4& got, const Shape4& want,
                          const char* what) {
  if (!(got == want)) {
    throw ShapeError(std::string(what) + ": expected " + want.str() + ", got " +
                     got.str());
  }
}

/// Stacks images (all the same shape) into an N x C x H x W tensor.
template <typename T>
Tensor4<T> to_tensor(std::span<const Image> images);

template <typename T>
Tensor4<T> to_tensor(const Image& image) {
  return to_tensor<T>(std::span<const Image>(&image, 1));
}

/// Extracts sample `n` as an image (C must be 1 or 3).
template <typename T>
Image to_image(const Tensor4<T>& t, int n = 0);

template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From>& t) {
  Tensor4<To> out(t.shape());
  std::transform(t.data().begin(), t.data().end(), out.data().begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

}  // namespace hazepark

#endif  // HAZEPARK_TENSOR_HPP_
