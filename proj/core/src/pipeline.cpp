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


#include "hazepark/pipeline.hpp"

#include <string>

#include "hazepark/optim.hpp"

namespace hazepark {

namespace {

constexpr std::string_view kDehazePrefix = "dehaze.";
constexpr std::string_view kClassifyPrefix = "classify.";

template <typename T>
void append_prefixed(std::vector<TensorRef<T>>& out, std::vector<TensorRef<T>> refs,
                     std::string_view prefix) {
  for (auto& r : refs) {
    r.name = std::string(prefix) + r.name;
    out.push_back(std::move(r));
  }
}

}  // namespace

template <typename T>
PipelineNet<T>::PipelineNet(DehazeNet<T> dehazer, ClassifierNet<T> classifier)
    : dehazer_(std::move(dehazer)), classifier_(std::move(classifier)) {}

template <typename T>
PipelineNet<T>::PipelineNet(DehazeSpec dehaze_spec, ClassifierSpec classifier_spec)
    : dehazer_(dehaze_spec), classifier_(classifier_spec) {}

template <typename T>
void PipelineNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  dehazer_.init(rng);
  classifier_.init(rng);
}

template <typename T>
Tensor4<T> PipelineNet<T>::forward_logits(const Tensor4<T>& x, Mode mode) {
  return classifier_.forward_logits(dehazer_.forward(x).clean, mode);
}

template <typename T>
Tensor4<T> PipelineNet<T>::forward(const Tensor4<T>& x, Mode mode) {
  return softmax(forward_logits(x, mode));
}

template <typename T>
Tensor4<T> PipelineNet<T>::backward(const Tensor4<T>& grad_logits) {
  return dehazer_.backward(classifier_.backward(grad_logits), true);
}

template <typename T>
std::vector<TensorRef<T>> PipelineNet<T>::parameters() {
  std::vector<TensorRef<T>> refs;
  append_prefixed(refs, dehazer_.parameters(), kDehazePrefix);
  append_prefixed(refs, classifier_.parameters(), kClassifyPrefix);
  return refs;
}

template <typename T>
std::vector<TensorRef<T>> PipelineNet<T>::state() {
  std::vector<TensorRef<T>> refs;
  append_prefixed(refs, dehazer_.state(), kDehazePrefix);
  append_prefixed(refs, classifier_.state(), kClassifyPrefix);
  return refs;
}

template <typename T>
void PipelineNet<T>::zero_grad() {
  dehazer_.zero_grad();
  classifier_.zero_grad();
}

template <typename T>
std::array<double, 2> PipelineNet<T>::predict(const Image& patch) {
  const Tensor4<T> p = forward(to_tensor<T>(patch), Mode::kEval);
  return {static_cast<double>(p[0]), static_cast<double>(p[1])};
}

template <typename T>
Checkpoint PipelineNet<T>::to_checkpoint(const nlohmann::json& meta) const {
  auto* self = const_cast<PipelineNet*>(this);
  const auto d = self->dehazer_.state();
  const auto c = self->classifier_.state();
  Checkpoint ckpt;
  ckpt.architecture_id = std::string(kPipelineArchId);
  ckpt.arch = {{"dehazer", dehazer_.spec().to_json()},
               {"classifier", classifier_.spec().to_json()}};
  ckpt.meta = meta.is_null() ? nlohmann::json::object() : meta;
  ckpt.tensors = export_tensors<T>(d, kDehazePrefix);
  auto ct = export_tensors<T>(c, kClassifyPrefix);
  ckpt.tensors.insert(ckpt.tensors.end(), ct.begin(), ct.end());
  return ckpt;
}

template <typename T>
PipelineNet<T> PipelineNet<T>::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.architecture_id != kPipelineArchId) {
    throw FormatError("checkpoint: expected a pipeline, got architecture '" +
                      ckpt.architecture_id + "'");
  }
  if (!ckpt.arch.contains("dehazer") || !ckpt.arch.contains("classifier")) {
    throw FormatError("checkpoint: pipeline arch lacks dehazer/classifier specs");
  }
  PipelineNet<T> net(DehazeSpec::from_json(ckpt.arch["dehazer"]),
                     ClassifierSpec::from_json(ckpt.arch["classifier"]));
  const auto d = net.dehazer_.state();
  const auto c = net.classifier_.state();
  import_tensors<T>(ckpt, d, kDehazePrefix);
  import_tensors<T>(ckpt, c, kClassifyPrefix);
  return net;
}

template class PipelineNet<float>;
template class PipelineNet<double>;

}  // namespace hazepark
