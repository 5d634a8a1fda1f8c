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

#include "hazepark/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hazepark {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// col is (C * k * k) x (out_h * out_w), row index c * k * k + ky * k + kx.
template <typename T>
void im2col(const T* x, int channels, int height, int width, int kernel,
            int stride, int pad, int out_h, int out_w, T* col) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = col + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) *
                           plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int height, int width, int kernel,
                int stride, int pad, int out_h, int out_w, T* x) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    T* xc = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row =
            col + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          T* dst = xc + static_cast<std::size_t>(iy) * width;
          const T* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_params(const Tensor4<T>& x, const Tensor4<T>& weight,
                       const Tensor4<T>& bias) {
  if (weight.h() != weight.w()) throw ShapeError("conv kernel must be square");
  if (weight.c() != x.c()) {
    throw ShapeError("conv expects " + std::to_string(weight.c()) +
                     " input channels, got " + std::to_string(x.c()));
  }
  if (!bias.empty()) {
    require_shape(bias.shape(), Shape4{weight.n(), 1, 1, 1}, "conv bias");
  }
}


// Direct stride-1 kernels. With only a handful of output channels the
// im2col GEMM is memory bound; these loops stream whole rows instead.
inline constexpr int kDirectMaxOutChannels = 8;

template <typename T>
bool use_direct(const Tensor4<T>& weight, int stride) {
  return stride == 1 && weight.n() <= kDirectMaxOutChannels;
}

// Valid output-column range [lo, hi) for kernel column kx.
inline void col_range(int kx, int pad, int in_w, int out_w, int& lo, int& hi) {
  lo = std::max(0, pad - kx);
  hi = std::min(out_w, in_w + pad - kx);
}

template <typename T>
void direct_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                    const Tensor4<T>& bias, int pad, Tensor4<T>& out) {
  const int k = weight.h();
  const int out_h = out.h();
  const int out_w = out.w();
  for (int n = 0; n < x.n(); ++n) {
    for (int o = 0; o < weight.n(); ++o) {
      T* y = out.sample(n) + static_cast<std::size_t>(o) * out_h * out_w;
      std::fill_n(y, out_h * out_w, bias.empty() ? T(0) : bias[o]);
      for (int c = 0; c < x.c(); ++c) {
        const T* xc = x.sample(n) + static_cast<std::size_t>(c) * x.h() * x.w();
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = weight(o, c, ky, kx);
            int lo, hi;
            col_range(kx, pad, x.w(), out_w, lo, hi);
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy - pad + ky;
              if (iy < 0 || iy >= x.h()) continue;
              T* dst = y + static_cast<std::size_t>(oy) * out_w;
              const T* src = xc + static_cast<std::size_t>(iy) * x.w() + (kx - pad);
              for (int ox = lo; ox < hi; ++ox) dst[ox] += wv * src[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void direct_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                     const Tensor4<T>& grad_out, int pad, ConvGrads<T>& g,
                     bool need_grad_x) {
  const int k = weight.h();
  const int out_h = grad_out.h();
  const int out_w = grad_out.w();
  std::vector<T> partial(static_cast<std::size_t>(out_w));
  for (int n = 0; n < x.n(); ++n) {
    for (int o = 0; o < weight.n(); ++o) {
      const T* gy = grad_out.sample(n) + static_cast<std::size_t>(o) * out_h * out_w;
      T bsum = T(0);
      for (int i = 0; i < out_h * out_w; ++i) bsum += gy[i];
      g.grad_b[o] += bsum;
      for (int c = 0; c < x.c(); ++c) {
        const std::size_t in_off = static_cast<std::size_t>(c) * x.h() * x.w();
        const T* xc = x.sample(n) + in_off;
        T* gxc = need_grad_x ? g.grad_x.sample(n) + in_off : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = weight(o, c, ky, kx);
            int lo, hi;
            col_range(kx, pad, x.w(), out_w, lo, hi);
            // Column-wise partial sums keep the inner loop vectorizable.
            std::fill(partial.begin(), partial.end(), T(0));
            for (int oy = 0; oy < out_h; ++oy) {
              const int iy = oy - pad + ky;
              if (iy < 0 || iy >= x.h()) continue;
              const T* grow = gy + static_cast<std::size_t>(oy) * out_w;
              const std::size_t shift =
                  static_cast<std::size_t>(iy) * x.w() + (kx - pad);
              const T* src = xc + shift;
              for (int ox = lo; ox < hi; ++ox) partial[ox] += grow[ox] * src[ox];
              if (gxc != nullptr) {
                T* dst = gxc + shift;
                for (int ox = lo; ox < hi; ++ox) dst[ox] += wv * grow[ox];
              }
            }
            T acc = T(0);
            for (int ox = lo; ox < hi; ++ox) acc += partial[ox];
            g.grad_w(o, c, ky, kx) += acc;
          }
        }
      }
    }
  }
}

}  // namespace

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

int conv_output_size(int in, int kernel, int stride, int pad) {
  if (kernel < 1 || stride < 1 || pad < 0) {
    throw ShapeError("invalid kernel/stride/pad");
  }
  const int span = in + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) +
                     " does not fit input " + std::to_string(in) +
                     " with pad " + std::to_string(pad));
  }
  return span / stride + 1;
}

template <typename T>
Tensor4<T> to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_tensor needs at least one image");
  const Image& first = images.front();
  Tensor4<T> out(static_cast<int>(images.size()), first.channels(),
                 first.height(), first.width());
  for (int n = 0; n < out.n(); ++n) {
    const Image& img = images[n];
    if (!img.same_shape(first)) throw ShapeError("to_tensor: mixed shapes");
    for (int c = 0; c < out.c(); ++c) {
      for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) {
          out(n, c, y, x) = static_cast<T>(img.at(y, x, c));
        }
      }
    }
  }
  return out;
}

template <typename T>
Image to_image(const Tensor4<T>& t, int n) {
  Image img(t.h(), t.w(), t.c());
  for (int c = 0; c < t.c(); ++c) {
    for (int y = 0; y < t.h(); ++y) {
      for (int x = 0; x < t.w(); ++x) {
        img.at(y, x, c) = static_cast<float>(t(n, c, y, x));
      }
    }
  }
  return img;
}

template <typename T>
Tensor4<T> conv_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                        const Tensor4<T>& bias, int stride, int pad) {
  check_conv_params(x, weight, bias);
  const int k = weight.h();
  const int out_h = conv_output_size(x.h(), k, stride, pad);
  const int out_w = conv_output_size(x.w(), k, stride, pad);
  const int rows = x.c() * k * k;
  const int plane = out_h * out_w;

  Tensor4<T> out(x.n(), weight.n(), out_h, out_w);
  if (use_direct(weight, stride)) {
    direct_forward(x, weight, bias, pad, out);
    return out;
  }
  std::vector<T> col(static_cast<std::size_t>(rows) * plane);
  ConstMatMap<T> w(weight.raw(), weight.n(), rows);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), x.c(), x.h(), x.w(), k, stride, pad, out_h, out_w,
           col.data());
    ConstMatMap<T> colm(col.data(), rows, plane);
    MatMap<T> y(out.sample(n), weight.n(), plane);
    y.noalias() = w * colm;
    if (!bias.empty()) {
      for (int o = 0; o < weight.n(); ++o) y.row(o).array() += bias[o];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                           const Tensor4<T>& grad_out, int stride, int pad,
                           bool need_grad_x) {
  check_conv_params(x, weight, Tensor4<T>());
  const int k = weight.h();
  const int out_h = conv_output_size(x.h(), k, stride, pad);
  const int out_w = conv_output_size(x.w(), k, stride, pad);
  require_shape(grad_out.shape(), Shape4{x.n(), weight.n(), out_h, out_w},
                "conv grad_out");
  const int rows = x.c() * k * k;
  const int plane = out_h * out_w;

  ConvGrads<T> g;
  g.grad_w = Tensor4<T>(weight.shape());
  g.grad_b = Tensor4<T>(weight.n(), 1, 1, 1);
  if (need_grad_x) g.grad_x = Tensor4<T>(x.shape());
  if (use_direct(weight, stride)) {
    direct_backward(x, weight, grad_out, pad, g, need_grad_x);
    return g;
  }

  std::vector<T> col(static_cast<std::size_t>(rows) * plane);
  std::vector<T> grad_col(need_grad_x ? col.size() : 0);
  ConstMatMap<T> w(weight.raw(), weight.n(), rows);
  MatMap<T> gw(g.grad_w.raw(), weight.n(), rows);
  for (int n = 0; n < x.n(); ++n) {
    im2col(x.sample(n), x.c(), x.h(), x.w(), k, stride, pad, out_h, out_w,
           col.data());
    ConstMatMap<T> colm(col.data(), rows, plane);
    ConstMatMap<T> gy(grad_out.sample(n), weight.n(), plane);
    gw.noalias() += gy * colm.transpose();
    for (int o = 0; o < weight.n(); ++o) g.grad_b[o] += gy.row(o).sum();
    if (need_grad_x) {
      MatMap<T> gc(grad_col.data(), rows, plane);
      gc.noalias() = w.transpose() * gy;
      col2im_add(grad_col.data(), x.c(), x.h(), x.w(), k, stride, pad, out_h,
                 out_w, g.grad_x.sample(n));
    }
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& x, int kernel, int stride) {
  const int out_h = conv_output_size(x.h(), kernel, stride, 0);
  const int out_w = conv_output_size(x.w(), kernel, stride, 0);
  PoolResult<T> r{Tensor4<T>(x.n(), x.c(), out_h, out_w), {}};
  r.argmax.resize(r.out.size());
  std::size_t o = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const std::size_t base =
          (static_cast<std::size_t>(n) * x.c() + c) * x.h() * x.w();
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = base;
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              const std::size_t i = base +
                                    static_cast<std::size_t>(oy * stride + ky) * x.w() +
                                    (ox * stride + kx);
              if (x[i] > best) {
                best = x[i];
                best_i = i;
              }
            }
          }
          r.out[o] = best;
          r.argmax[o] = static_cast<std::uint32_t>(best_i);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_out,
                            std::span<const std::uint32_t> argmax,
                            const Shape4& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool backward: argmax does not match grad_out");
  }
  Tensor4<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out) {
  require_shape(grad_out.shape(), x.shape(), "relu grad_out");
  Tensor4<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  }
  return g;
}

template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& x, const Tensor4<T>& weight,
                      const Tensor4<T>& bias) {
  const int in = static_cast<int>(x.shape().per_sample());
  if (weight.c() != in || weight.h() != 1 || weight.w() != 1) {
    throw ShapeError("fc expects " + std::to_string(weight.c()) +
                     " inputs, got " + std::to_string(in));
  }
  require_shape(bias.shape(), Shape4{weight.n(), 1, 1, 1}, "fc bias");
  Tensor4<T> y(x.n(), weight.n(), 1, 1);
  ConstMatMap<T> xm(x.raw(), x.n(), in);
  ConstMatMap<T> w(weight.raw(), weight.n(), in);
  MatMap<T> ym(y.raw(), x.n(), weight.n());
  ym.noalias() = xm * w.transpose();
  for (int n = 0; n < x.n(); ++n) {
    for (int o = 0; o < weight.n(); ++o) ym(n, o) += bias[o];
  }
  return y;
}

template <typename T>
ConvGrads<T> fc_backward(const Tensor4<T>& x, const Tensor4<T>& weight,
                         const Tensor4<T>& grad_out) {
  const int in = static_cast<int>(x.shape().per_sample());
  if (weight.c() != in) throw ShapeError("fc backward: input size mismatch");
  require_shape(grad_out.shape(), Shape4{x.n(), weight.n(), 1, 1},
                "fc grad_out");
  ConvGrads<T> g;
  g.grad_x = Tensor4<T>(x.shape());
  g.grad_w = Tensor4<T>(weight.shape());
  g.grad_b = Tensor4<T>(weight.n(), 1, 1, 1);
  ConstMatMap<T> xm(x.raw(), x.n(), in);
  ConstMatMap<T> w(weight.raw(), weight.n(), in);
  ConstMatMap<T> gy(grad_out.raw(), x.n(), weight.n());
  MatMap<T>(g.grad_w.raw(), weight.n(), in).noalias() = gy.transpose() * xm;
  MatMap<T>(g.grad_x.raw(), x.n(), in).noalias() = gy * w;
  for (int o = 0; o < weight.n(); ++o) g.grad_b[o] = gy.col(o).sum();
  return g;
}

template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
  const int classes = static_cast<int>(logits.shape().per_sample());
  Tensor4<T> p(logits.shape());
  for (int n = 0; n < logits.n(); ++n) {
    const T* z = logits.sample(n);
    T* out = p.sample(n);
    const T zmax = *std::max_element(z, z + classes);
    T sum = 0;
    for (int k = 0; k < classes; ++k) {
      out[k] = std::exp(z[k] - zmax);
      sum += out[k];
    }
    for (int k = 0; k < classes; ++k) out[k] /= sum;
  }
  return p;
}

template <typename T>
Tensor4<T> concat_channels(std::span<const Tensor4<T>* const> xs) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const Shape4 first = xs.front()->shape();
  int channels = 0;
  for (const auto* t : xs) {
    if (t->n() != first.n || t->h() != first.h || t->w() != first.w) {
      throw ShapeError("concat: " + t->shape().str() + " vs " + first.str());
    }
    channels += t->c();
  }
  Tensor4<T> out(first.n, channels, first.h, first.w);
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  for (int n = 0; n < first.n; ++n) {
    T* dst = out.sample(n);
    for (const auto* t : xs) {
      const std::size_t len = t->c() * plane;
      std::copy_n(t->sample(n), len, dst);
      dst += len;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& x,
                                       std::span<const int> channels) {
  if (std::accumulate(channels.begin(), channels.end(), 0) != x.c()) {
    throw ShapeError("split: channel counts do not sum to " +
                     std::to_string(x.c()));
  }
  std::vector<Tensor4<T>> parts;
  parts.reserve(channels.size());
  for (int c : channels) parts.emplace_back(x.n(), c, x.h(), x.w());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n) {
    const T* src = x.sample(n);
    for (auto& p : parts) {
      const std::size_t len = p.c() * plane;
      std::copy_n(src, len, p.sample(n));
      src += len;
    }
  }
  return parts;
}

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, std::span<const T> gamma,
                             std::span<const T> shift, BatchNormStats<T> stats,
                             Mode mode, BatchNormCache<T>* cache) {
  const int channels = x.c();
  if (gamma.size() != static_cast<std::size_t>(channels) ||
      shift.size() != gamma.size() || stats.running_mean.size() != gamma.size() ||
      stats.running_var.size() != gamma.size()) {
    throw ShapeError("batchnorm parameter size does not match channels");
  }
  if (mode == Mode::kTrain && x.n() < 2) {
    throw ConfigError("batchnorm in train mode needs batch >= 2, got " +
                      std::to_string(x.n()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  const double count = static_cast<double>(x.n()) * plane;
  const T eps = static_cast<T>(kBatchNormEpsilon);
  const T momentum = static_cast<T>(kBatchNormMomentum);

  Tensor4<T> y(x.shape());
  Tensor4<T> x_hat(x.shape());
  std::vector<T> inv_std(channels);
  for (int c = 0; c < channels; ++c) {
    T mean;
    T var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const T* p = x.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double m = sum / count;
      double sq = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const T* p = x.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / count);
      stats.running_mean[c] = momentum * stats.running_mean[c] + (1 - momentum) * mean;
      stats.running_var[c] = momentum * stats.running_var[c] + (1 - momentum) * var;
    } else {
      mean = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const T istd = T(1) / std::sqrt(var + eps);
    inv_std[c] = istd;
    for (int n = 0; n < x.n(); ++n) {
      const T* p = x.sample(n) + c * plane;
      T* h = x_hat.sample(n) + c * plane;
      T* o = y.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        h[i] = (p[i] - mean) * istd;
        o[i] = gamma[c] * h[i] + shift[c];
      }
    }
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                     std::span<const T> gamma,
                                     const Tensor4<T>& grad_out, bool eval) {
  const Tensor4<T>& x_hat = cache.x_hat;
  require_shape(grad_out.shape(), x_hat.shape(), "batchnorm grad_out");
  const int channels = x_hat.c();
  const std::size_t plane = static_cast<std::size_t>(x_hat.h()) * x_hat.w();
  const T count = static_cast<T>(static_cast<double>(x_hat.n()) * plane);

  BatchNormGrads<T> g{Tensor4<T>(x_hat.shape()), std::vector<T>(channels),
                      std::vector<T>(channels)};
  for (int c = 0; c < channels; ++c) {
    T sum_g = 0;
    T sum_gx = 0;
    for (int n = 0; n < x_hat.n(); ++n) {
      const T* gy = grad_out.sample(n) + c * plane;
      const T* h = x_hat.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += gy[i];
        sum_gx += gy[i] * h[i];
      }
    }
    g.grad_shift[c] = sum_g;
    g.grad_gamma[c] = sum_gx;
    const T scale = gamma[c] * cache.inv_std[c];
    for (int n = 0; n < x_hat.n(); ++n) {
      const T* gy = grad_out.sample(n) + c * plane;
      const T* h = x_hat.sample(n) + c * plane;
      T* gx = g.grad_x.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        gx[i] = eval ? scale * gy[i]
                     : scale * (gy[i] - sum_g / count - h[i] * sum_gx / count);
      }
    }
  }
  return g;
}

template <typename T>
void he_uniform(Tensor4<T>& weight, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : weight.data()) v = static_cast<T>(dist(rng));
}

// ---- layer objects ---------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::string name, ConvConfig config)
    : config_(config),
      weight_(name + ".weight",
              Shape4{config.out_channels, config.in_channels, config.kernel,
                     config.kernel}),
      bias_(name + ".bias", Shape4{config.out_channels, 1, 1, 1}) {}

template <typename T>
Shape4 Conv2d<T>::output_shape(const Shape4& in) const {
  if (in.c != config_.in_channels) {
    throw ShapeError(weight_.name + ": expected " +
                     std::to_string(config_.in_channels) + " channels, got " +
                     std::to_string(in.c));
  }
  return Shape4{in.n, config_.out_channels,
                conv_output_size(in.h, config_.kernel, config_.stride, config_.pad),
                conv_output_size(in.w, config_.kernel, config_.stride, config_.pad)};
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  he_uniform(weight_.value,
             config_.in_channels * config_.kernel * config_.kernel, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T>& x) {
  input_ = x;
  return conv_forward(x, weight_.value, bias_.value, config_.stride,
                      config_.pad);
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T>& grad_out, bool need_grad_x) {
  if (input_.empty()) throw StateError(weight_.name + ": backward before forward");
  auto g = conv_backward(input_, weight_.value, grad_out, config_.stride,
                         config_.pad, need_grad_x);
  for (std::size_t i = 0; i < g.grad_w.size(); ++i) weight_.grad[i] += g.grad_w[i];
  for (std::size_t i = 0; i < g.grad_b.size(); ++i) bias_.grad[i] += g.grad_b[i];
  return std::move(g.grad_x);
}

template <typename T>
void Conv2d<T>::collect(std::vector<TensorRef<T>>& out) {
  out.push_back({weight_.name, &weight_.value, &weight_.grad});
  out.push_back({bias_.name, &bias_.value, &bias_.grad});
}

template <typename T>
Shape4 MaxPool2d<T>::output_shape(const Shape4& in) const {
  return Shape4{in.n, in.c, conv_output_size(in.h, kernel_, stride_, 0),
                conv_output_size(in.w, kernel_, stride_, 0)};
}

template <typename T>
Tensor4<T> MaxPool2d<T>::forward(const Tensor4<T>& x) {
  auto r = maxpool_forward(x, kernel_, stride_);
  input_shape_ = x.shape();
  argmax_ = std::move(r.argmax);
  return std::move(r.out);
}

template <typename T>
Tensor4<T> MaxPool2d<T>::backward(const Tensor4<T>& grad_out) {
  return maxpool_backward(grad_out, std::span<const std::uint32_t>(argmax_),
                          input_shape_);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels)
    : name_(name),
      gamma_(name + ".gamma", Shape4{channels, 1, 1, 1}),
      shift_(name + ".shift", Shape4{channels, 1, 1, 1}),
      running_mean_(channels, 1, 1, 1, T(0)),
      running_var_(channels, 1, 1, 1, T(1)) {
  gamma_.value.fill(T(1));
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::forward(const Tensor4<T>& x, Mode mode) {
  last_mode_ = mode;
  return batchnorm_forward<T>(
      x, gamma_.value.data(), shift_.value.data(),
      BatchNormStats<T>{running_mean_.data(), running_var_.data()}, mode,
      &cache_);
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::backward(const Tensor4<T>& grad_out) {
  if (cache_.x_hat.empty()) throw StateError(name_ + ": backward before forward");
  auto g = batchnorm_backward<T>(cache_, gamma_.value.data(), grad_out,
                                 last_mode_ == Mode::kEval);
  for (std::size_t c = 0; c < g.grad_gamma.size(); ++c) {
    gamma_.grad[c] += g.grad_gamma[c];
    shift_.grad[c] += g.grad_shift[c];
  }
  return std::move(g.grad_x);
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<TensorRef<T>>& out, bool with_buffers) {
  out.push_back({gamma_.name, &gamma_.value, &gamma_.grad});
  out.push_back({shift_.name, &shift_.value, &shift_.grad});
  if (with_buffers) {
    out.push_back({name_ + ".running_mean", &running_mean_, nullptr});
    out.push_back({name_ + ".running_var", &running_var_, nullptr});
  }
}

template <typename T>
Tensor4<T> Relu<T>::forward(const Tensor4<T>& x) {
  input_ = x;
  return relu_forward(x);
}

template <typename T>
Tensor4<T> Relu<T>::backward(const Tensor4<T>& grad_out) {
  return relu_backward(input_, grad_out);
}

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", Shape4{out_features, in_features, 1, 1}),
      bias_(name + ".bias", Shape4{out_features, 1, 1, 1}) {}

template <typename T>
void Linear<T>::init(Rng& rng) {
  he_uniform(weight_.value, in_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor4<T> Linear<T>::forward(const Tensor4<T>& x) {
  input_ = x;
  return fc_forward(x, weight_.value, bias_.value);
}

template <typename T>
Tensor4<T> Linear<T>::backward(const Tensor4<T>& grad_out) {
  if (input_.empty()) throw StateError(weight_.name + ": backward before forward");
  auto g = fc_backward(input_, weight_.value, grad_out);
  for (std::size_t i = 0; i < g.grad_w.size(); ++i) weight_.grad[i] += g.grad_w[i];
  for (std::size_t i = 0; i < g.grad_b.size(); ++i) bias_.grad[i] += g.grad_b[i];
  return std::move(g.grad_x);
}

template <typename T>
void Linear<T>::collect(std::vector<TensorRef<T>>& out) {
  out.push_back({weight_.name, &weight_.value, &weight_.grad});
  out.push_back({bias_.name, &bias_.value, &bias_.grad});
}

#define HAZEPARK_INSTANTIATE(T)                                                \
  template Tensor4<T> to_tensor<T>(std::span<const Image>);                    \
  template Image to_image<T>(const Tensor4<T>&, int);                          \
  template Tensor4<T> conv_forward<T>(const Tensor4<T>&, const Tensor4<T>&,    \
                                      const Tensor4<T>&, int, int);            \
  template ConvGrads<T> conv_backward<T>(const Tensor4<T>&, const Tensor4<T>&, \
                                         const Tensor4<T>&, int, int, bool);   \
  template PoolResult<T> maxpool_forward<T>(const Tensor4<T>&, int, int);      \
  template Tensor4<T> maxpool_backward<T>(                                     \
      const Tensor4<T>&, std::span<const std::uint32_t>, const Shape4&);       \
  template Tensor4<T> relu_forward<T>(const Tensor4<T>&);                      \
  template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);  \
  template Tensor4<T> fc_forward<T>(const Tensor4<T>&, const Tensor4<T>&,      \
                                    const Tensor4<T>&);                        \
  template ConvGrads<T> fc_backward<T>(const Tensor4<T>&, const Tensor4<T>&,   \
                                       const Tensor4<T>&);                     \
  template Tensor4<T> softmax<T>(const Tensor4<T>&);                           \
  template Tensor4<T> concat_channels<T>(std::span<const Tensor4<T>* const>);  \
  template std::vector<Tensor4<T>> split_channels<T>(const Tensor4<T>&,        \
                                                     std::span<const int>);    \
  template Tensor4<T> batchnorm_forward<T>(                                    \
      const Tensor4<T>&, std::span<const T>, std::span<const T>,               \
      BatchNormStats<T>, Mode, BatchNormCache<T>*);                            \
  template BatchNormGrads<T> batchnorm_backward<T>(                            \
      const BatchNormCache<T>&, std::span<const T>, const Tensor4<T>&, bool);  \
  template void he_uniform<T>(Tensor4<T>&, int, Rng&);                         \
  template class Conv2d<T>;                                                    \
  template class MaxPool2d<T>;                                                 \
  template class BatchNorm2d<T>;                                               \
  template class Relu<T>;                                                      \
  template class Linear<T>;

HAZEPARK_INSTANTIATE(float)
HAZEPARK_INSTANTIATE(double)

#undef HAZEPARK_INSTANTIATE

}  // namespace hazepark
