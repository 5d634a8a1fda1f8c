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

#include "hazepark/dehazer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hazepark/optim.hpp"

namespace hazepark {

namespace {

template <typename T>
void add_into(Tensor4<T>& acc, const Tensor4<T>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

DehazeSpec DehazeSpec::tiny() {
  DehazeSpec s;
  s.widths = {2, 2, 2, 2};
  s.kernels = {1, 3, 3, 3, 3};
  return s;
}

nlohmann::json DehazeSpec::to_json() const {
  return {{"widths", widths}, {"kernels", kernels}, {"b", head.b}};
}

DehazeSpec DehazeSpec::from_json(const nlohmann::json& j) {
  try {
    DehazeSpec s;
    s.widths = j.at("widths").get<std::array<int, 4>>();
    s.kernels = j.at("kernels").get<std::array<int, 5>>();
    s.head.b = j.at("b").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dehazer spec: ") + e.what());
  }
}

template <typename T>
DehazeNet<T>::DehazeNet(DehazeSpec spec) : spec_(spec) {
  if (!std::isfinite(spec_.head.b)) throw ConfigError("dehaze bias b must be finite");
  const auto& w = spec_.widths;
  const std::array<int, 5> in_channels{3, w[0], w[0] + w[1], w[0] + w[1] + w[2],
                                       w[0] + w[1] + w[2] + w[3]};
  const std::array<int, 5> out_channels{w[0], w[1], w[2], w[3], 3};
  for (int i = 0; i < 5; ++i) {
    const int k = spec_.kernels[i];
    if (k < 1 || k % 2 == 0) {
      throw ConfigError("dehazer kernels must be odd, got " + std::to_string(k));
    }
    if (out_channels[i] < 1) throw ConfigError("dehazer widths must be >= 1");
    convs_[i] = Conv2d<T>("conv" + std::to_string(i + 1),
                          ConvConfig{in_channels[i], out_channels[i], k, 1, k / 2});
  }
}

template <typename T>
void DehazeNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  init(rng);
}

template <typename T>
void DehazeNet<T>::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
  // Start near the identity map (K = 1 gives J = I for b = 1). With a zero
  // bias, K begins half inside ReLU's dead zone and training collapses to
  // the all-white output.
  convs_[4].bias().value.fill(T(1));
}

template <typename T>
DehazeOutput<T> DehazeNet<T>::forward(const Tensor4<T>& x) {
  if (x.c() != 3) {
    throw ShapeError("dehazer expects 3 channels, got " + std::to_string(x.c()));
  }
  if (x.h() < 8 || x.w() < 8) {
    throw ShapeError("dehazer expects H, W >= 8, got " + x.shape().str());
  }
  input_ = x;
  const Tensor4<T> c1 = relus_[0].forward(convs_[0].forward(x));
  const Tensor4<T> c2 = relus_[1].forward(convs_[1].forward(c1));
  const Tensor4<T>* cat1[] = {&c1, &c2};
  const Tensor4<T> c3 =
      relus_[2].forward(convs_[2].forward(concat_channels<T>(cat1)));
  const Tensor4<T>* cat2[] = {&c1, &c2, &c3};
  const Tensor4<T> c4 =
      relus_[3].forward(convs_[3].forward(concat_channels<T>(cat2)));
  const Tensor4<T>* cat3[] = {&c1, &c2, &c3, &c4};
  k_ = relus_[4].forward(convs_[4].forward(concat_channels<T>(cat3)));

  const T b = static_cast<T>(spec_.head.b);
  raw_ = Tensor4<T>(x.shape());
  Tensor4<T> clean(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    raw_[i] = k_[i] * x[i] - k_[i] + b;
    clean[i] = std::clamp(raw_[i], T(0), T(1));
  }
  return {std::move(clean), k_};
}

template <typename T>
Tensor4<T> DehazeNet<T>::backward(const Tensor4<T>& grad_clean,
                                  bool need_grad_input) {
  if (input_.empty()) throw StateError("dehazer: backward before forward");
  require_shape(grad_clean.shape(), input_.shape(), "dehazer grad");

  Tensor4<T> g_k(input_.shape());
  Tensor4<T> g_direct;
  if (need_grad_input) g_direct = Tensor4<T>(input_.shape());
  for (std::size_t i = 0; i < input_.size(); ++i) {
    const T g = (raw_[i] >= T(0) && raw_[i] <= T(1)) ? grad_clean[i] : T(0);
    g_k[i] = g * (input_[i] - T(1));
    if (need_grad_input) g_direct[i] = g * k_[i];
  }

  const auto& w = spec_.widths;
  Tensor4<T> g_cat3 = convs_[4].backward(relus_[4].backward(g_k));
  const int split3[] = {w[0], w[1], w[2], w[3]};
  auto p3 = split_channels<T>(g_cat3, split3);

  Tensor4<T> g_cat2 = convs_[3].backward(relus_[3].backward(p3[3]));
  const int split2[] = {w[0], w[1], w[2]};
  auto p2 = split_channels<T>(g_cat2, split2);

  Tensor4<T> g3 = p3[2];
  add_into(g3, p2[2]);
  Tensor4<T> g_cat1 = convs_[2].backward(relus_[2].backward(g3));
  const int split1[] = {w[0], w[1]};
  auto p1 = split_channels<T>(g_cat1, split1);

  Tensor4<T> g2 = p3[1];
  add_into(g2, p2[1]);
  add_into(g2, p1[1]);
  Tensor4<T> g1 = convs_[1].backward(relus_[1].backward(g2));
  add_into(g1, p3[0]);
  add_into(g1, p2[0]);
  add_into(g1, p1[0]);

  Tensor4<T> g_in = convs_[0].backward(relus_[0].backward(g1), need_grad_input);
  if (need_grad_input) add_into(g_in, g_direct);
  return g_in;
}

template <typename T>
std::vector<TensorRef<T>> DehazeNet<T>::parameters() {
  std::vector<TensorRef<T>> refs;
  for (auto& c : convs_) c.collect(refs);
  return refs;
}

template <typename T>
void DehazeNet<T>::zero_grad() {
  auto refs = parameters();
  zero_grads<T>(refs);
}

template <typename T>
Checkpoint DehazeNet<T>::to_checkpoint(const nlohmann::json& meta) const {
  auto* self = const_cast<DehazeNet*>(this);
  const auto refs = self->state();
  Checkpoint ckpt;
  ckpt.architecture_id = std::string(kDehazerArchId);
  ckpt.arch = spec_.to_json();
  ckpt.meta = meta.is_null() ? nlohmann::json::object() : meta;
  ckpt.tensors = export_tensors<T>(refs);
  return ckpt;
}

template <typename T>
DehazeNet<T> DehazeNet<T>::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.architecture_id != kDehazerArchId) {
    throw FormatError("checkpoint: expected a dehazer, got architecture '" +
                      ckpt.architecture_id + "'");
  }
  DehazeNet<T> net(DehazeSpec::from_json(ckpt.arch));
  const auto refs = net.state();
  import_tensors<T>(ckpt, refs);
  return net;
}

DehazedImage dehaze_forward(DehazeNet<float>& net, const Image& hazy) {
  if (hazy.channels() != 3) {
    throw ShapeError("dehazer expects 3 channels, got " +
                     std::to_string(hazy.channels()));
  }
  auto out = net.forward(to_tensor<float>(hazy));
  DehazedImage r{to_image(out.clean), KMap{hazy.height(), hazy.width(), 3, {}}};
  r.k.data.resize(hazy.size());
  for (int y = 0; y < hazy.height(); ++y) {
    for (int x = 0; x < hazy.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        r.k.data[(static_cast<std::size_t>(y) * hazy.width() + x) * 3 + c] =
            out.k(0, c, y, x);
      }
    }
  }
  return r;
}

template class DehazeNet<float>;
template class DehazeNet<double>;

}  // namespace hazepark
