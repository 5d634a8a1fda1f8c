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


// Micro-benchmarks for the hot paths: raw convolution, the two networks at
// full input size, and single-patch inference through the fused pipeline.

#include <benchmark/benchmark.h>

#include <random>

#include "hazepark/classifier.hpp"
#include "hazepark/dehazer.hpp"
#include "hazepark/pipeline.hpp"

namespace {

using hazepark::Shape4;
using hazepark::Tensor4;

Tensor4<float> noise(Shape4 s, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor4<float> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

hazepark::Image noise_image(int side, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  hazepark::Image img(side, side, 3, 0.0f);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

// Args: spatial side, input channels, output channels, kernel.
void BM_ConvForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int cin = static_cast<int>(state.range(1));
  const int cout = static_cast<int>(state.range(2));
  const int k = static_cast<int>(state.range(3));
  const auto x = noise({1, cin, side, side}, 1);
  const auto w = noise({cout, cin, k, k}, 2);
  const auto b = noise({cout, 1, 1, 1}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hazepark::conv_forward(x, w, b, 1, k / 2));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ConvForward)
    ->Args({56, 3, 16, 3})
    ->Args({112, 9, 3, 5})
    ->Args({224, 12, 3, 3})
    ->Unit(benchmark::kMillisecond);

void BM_ClassifierForward(benchmark::State& state) {
  hazepark::ClassifierNet<float> net;
  net.init(1);
  const auto x = noise({static_cast<int>(state.range(0)), 3, 224, 224}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x, hazepark::Mode::kEval));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClassifierForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DehazerForward(benchmark::State& state) {
  hazepark::DehazeNet<float> net;
  net.init(1);
  const int side = static_cast<int>(state.range(0));
  const auto x = noise({1, 3, side, side}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DehazerForward)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_DehazerTrainStep(benchmark::State& state) {
  hazepark::DehazeNet<float> net;
  net.init(1);
  const auto x = noise({8, 3, 64, 64}, 6);
  for (auto _ : state) {
    net.zero_grad();
    const auto out = net.forward(x);
    benchmark::DoNotOptimize(net.backward(out.clean));
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_DehazerTrainStep)->Unit(benchmark::kMillisecond);

void BM_PipelinePredict(benchmark::State& state) {
  hazepark::DehazeNet<float> dehazer;
  dehazer.init(1);
  hazepark::ClassifierNet<float> cls;
  cls.init(1);
  hazepark::PipelineNet<float> pipe(dehazer, cls);
  const auto patch = noise_image(224, 7);
  for (auto _ : state) benchmark::DoNotOptimize(pipe.predict(patch));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PipelinePredict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
