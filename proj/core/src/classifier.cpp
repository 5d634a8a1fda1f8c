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

#include "hazepark/classifier.hpp"

#include <string>

#include "hazepark/image.hpp"
#include "hazepark/optim.hpp"

namespace hazepark {

ClassifierSpec ClassifierSpec::modified_malexnet() {
  ClassifierSpec s;
  s.input_size = 224;
  s.stages = {ConvStage{16, 11, 4, 3, 2, true}, ConvStage{20, 5, 1, 3, 2, true},
              ConvStage{30, 3, 1, 3, 2, false}};
  s.fc_hidden = 48;
  s.classes = 2;
  return s;
}

ClassifierSpec ClassifierSpec::reduced(int input_size) {
  if (input_size < 32) {
    throw ConfigError("reduced classifier needs input >= 32, got " +
                      std::to_string(input_size));
  }
  ClassifierSpec s;
  s.input_size = input_size;
  s.stages = {ConvStage{16, 5, 1, 3, 2, true}, ConvStage{20, 3, 1, 3, 2, true},
              ConvStage{30, 3, 1, 3, 2, false}};
  s.fc_hidden = 48;
  s.classes = 2;
  s.shape_chain();  // validates the size chain
  return s;
}

ClassifierSpec ClassifierSpec::tiny() {
  ClassifierSpec s;
  s.input_size = 8;
  s.stages = {ConvStage{3, 3, 1, 2, 1, true}, ConvStage{4, 2, 1, 2, 1, true},
              ConvStage{4, 2, 1, 2, 1, false}};
  s.fc_hidden = 5;
  s.classes = 2;
  return s;
}

std::string ClassifierSpec::architecture_id() const {
  return *this == modified_malexnet() ? std::string(kClassifierArchId)
                                      : std::string(kReducedClassifierArchId);
}

std::vector<Shape4> ClassifierSpec::shape_chain() const {
  std::vector<Shape4> chain;
  int channels = 3;
  int size = input_size;
  for (const auto& st : stages) {
    size = conv_output_size(size, st.kernel, st.stride, 0);
    channels = st.filters;
    chain.push_back({1, channels, size, size});
    size = conv_output_size(size, st.pool_kernel, st.pool_stride, 0);
    chain.push_back({1, channels, size, size});
  }
  chain.push_back({1, channels * size * size, 1, 1});
  chain.push_back({1, fc_hidden, 1, 1});
  chain.push_back({1, classes, 1, 1});
  return chain;
}

std::size_t ClassifierSpec::parameter_count() const {
  std::size_t total = 0;
  int channels = 3;
  for (const auto& st : stages) {
    total += static_cast<std::size_t>(st.filters) * channels * st.kernel * st.kernel +
             st.filters;
    if (st.batchnorm) total += 2 * static_cast<std::size_t>(st.filters);
    channels = st.filters;
  }
  const auto chain = shape_chain();
  const std::size_t flat = chain[6].c;
  total += flat * fc_hidden + fc_hidden;
  total += static_cast<std::size_t>(fc_hidden) * classes + classes;
  return total;
}

nlohmann::json ClassifierSpec::to_json() const {
  nlohmann::json j;
  j["input_size"] = input_size;
  j["fc_hidden"] = fc_hidden;
  j["classes"] = classes;
  j["stages"] = nlohmann::json::array();
  for (const auto& st : stages) {
    j["stages"].push_back({{"filters", st.filters},
                           {"kernel", st.kernel},
                           {"stride", st.stride},
                           {"pool_kernel", st.pool_kernel},
                           {"pool_stride", st.pool_stride},
                           {"batchnorm", st.batchnorm}});
  }
  return j;
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& j) {
  try {
    ClassifierSpec s;
    s.input_size = j.at("input_size").get<int>();
    s.fc_hidden = j.at("fc_hidden").get<int>();
    s.classes = j.at("classes").get<int>();
    const auto& stages = j.at("stages");
    if (stages.size() != 3) throw FormatError("classifier spec needs 3 stages");
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& st = stages[i];
      s.stages[i] = ConvStage{st.at("filters").get<int>(),
                              st.at("kernel").get<int>(),
                              st.at("stride").get<int>(),
                              st.at("pool_kernel").get<int>(),
                              st.at("pool_stride").get<int>(),
                              st.at("batchnorm").get<bool>()};
    }
    s.shape_chain();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier spec: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("classifier spec: ") + e.what());
  }
}

template <typename T>
ClassifierNet<T>::ClassifierNet(ClassifierSpec spec) : spec_(spec) {
  const auto chain = spec_.shape_chain();
  int channels = 3;
  for (int i = 0; i < 3; ++i) {
    const auto& st = spec_.stages[i];
    const std::string idx = std::to_string(i + 1);
    convs_[i] = Conv2d<T>("conv" + idx,
                          ConvConfig{channels, st.filters, st.kernel, st.stride, 0});
    pools_[i] = MaxPool2d<T>(st.pool_kernel, st.pool_stride);
    if (st.batchnorm) norms_[i] = BatchNorm2d<T>("bn" + idx, st.filters);
    channels = st.filters;
  }
  fc4_ = Linear<T>("fc4", chain[6].c, spec_.fc_hidden);
  fc5_ = Linear<T>("fc5", spec_.fc_hidden, spec_.classes);
}

template <typename T>
void ClassifierNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  init(rng);
}

template <typename T>
void ClassifierNet<T>::init(Rng& rng) {
  for (auto& conv : convs_) conv.init(rng);
  fc4_.init(rng);
  fc5_.init(rng);
  for (int i = 0; i < 3; ++i) {
    if (!spec_.stages[i].batchnorm) continue;
    norms_[i].gamma().value.fill(T(1));
    norms_[i].shift().value.fill(T(0));
    norms_[i].running_mean().fill(T(0));
    norms_[i].running_var().fill(T(1));
  }
}

template <typename T>
Tensor4<T> ClassifierNet<T>::forward_logits(const Tensor4<T>& x, Mode mode) {
  if (x.c() != 3 || x.h() != spec_.input_size || x.w() != spec_.input_size) {
    throw ShapeError("classifier expects N x 3 x " +
                     std::to_string(spec_.input_size) + " x " +
                     std::to_string(spec_.input_size) + ", got " +
                     x.shape().str());
  }
  trace_.clear();
  Tensor4<T> h = x;
  for (int i = 0; i < 3; ++i) {
    h = convs_[i].forward(h);
    trace_.push_back(h.shape());
    h = pools_[i].forward(h);
    trace_.push_back(h.shape());
    if (spec_.stages[i].batchnorm) h = norms_[i].forward(h, mode);
    h = relus_[i].forward(h);
  }
  trace_.push_back(Shape4{h.n(), static_cast<int>(h.shape().per_sample()), 1, 1});
  h = fc4_.forward(h);
  trace_.push_back(h.shape());
  h = relus_[3].forward(h);
  h = fc5_.forward(h);
  trace_.push_back(h.shape());
  return h;
}

template <typename T>
Tensor4<T> ClassifierNet<T>::forward(const Tensor4<T>& x, Mode mode) {
  return softmax(forward_logits(x, mode));
}

template <typename T>
Tensor4<T> ClassifierNet<T>::backward(const Tensor4<T>& grad_logits) {
  Tensor4<T> g = fc5_.backward(grad_logits);
  g = relus_[3].backward(g);
  g = fc4_.backward(g);
  for (int i = 2; i >= 0; --i) {
    g = relus_[i].backward(g);
    if (spec_.stages[i].batchnorm) g = norms_[i].backward(g);
    g = pools_[i].backward(g);
    g = convs_[i].backward(g);
  }
  return g;
}

template <typename T>
std::vector<TensorRef<T>> ClassifierNet<T>::parameters() {
  std::vector<TensorRef<T>> refs;
  for (int i = 0; i < 3; ++i) {
    convs_[i].collect(refs);
    if (spec_.stages[i].batchnorm) norms_[i].collect(refs, false);
  }
  fc4_.collect(refs);
  fc5_.collect(refs);
  return refs;
}

template <typename T>
std::vector<TensorRef<T>> ClassifierNet<T>::state() {
  std::vector<TensorRef<T>> refs;
  for (int i = 0; i < 3; ++i) {
    convs_[i].collect(refs);
    if (spec_.stages[i].batchnorm) norms_[i].collect(refs, true);
  }
  fc4_.collect(refs);
  fc5_.collect(refs);
  return refs;
}

template <typename T>
void ClassifierNet<T>::zero_grad() {
  auto refs = parameters();
  zero_grads<T>(refs);
}

template <typename T>
std::array<double, 2> ClassifierNet<T>::predict(const Image& patch) {
  const Tensor4<T> p = forward(to_tensor<T>(patch), Mode::kEval);
  return {static_cast<double>(p[0]), static_cast<double>(p[1])};
}

template <typename T>
Checkpoint ClassifierNet<T>::to_checkpoint(const nlohmann::json& meta) const {
  auto* self = const_cast<ClassifierNet*>(this);
  const auto refs = self->state();
  Checkpoint ckpt;
  ckpt.architecture_id = spec_.architecture_id();
  ckpt.arch = spec_.to_json();
  ckpt.meta = meta.is_null() ? nlohmann::json::object() : meta;
  ckpt.tensors = export_tensors<T>(refs);
  return ckpt;
}

template <typename T>
ClassifierNet<T> ClassifierNet<T>::from_checkpoint(const Checkpoint& ckpt) {
  ClassifierSpec spec;
  if (ckpt.architecture_id == kClassifierArchId) {
    spec = ClassifierSpec::modified_malexnet();
    if (!ckpt.arch.empty() && ClassifierSpec::from_json(ckpt.arch) != spec) {
      throw FormatError("checkpoint: " + std::string(kClassifierArchId) +
                        " with non-standard layer configuration");
    }
  } else if (ckpt.architecture_id == kReducedClassifierArchId) {
    spec = ClassifierSpec::from_json(ckpt.arch);
  } else {
    throw FormatError("checkpoint: expected a classifier, got architecture '" +
                      ckpt.architecture_id + "'");
  }
  ClassifierNet<T> net(spec);
  const auto refs = net.state();
  import_tensors<T>(ckpt, refs);
  return net;
}

int predicted_class(const std::array<double, 2>& probs) {
  return probs[1] > probs[0] ? kBusy : kFree;
}

template class ClassifierNet<float>;
template class ClassifierNet<double>;

}  // namespace hazepark
