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


#include "hazepark/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "hazepark/codec.hpp"

namespace hazepark {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

double ratio(std::size_t a, std::size_t b) {
  return b == 0 ? kNaN : static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

nlohmann::json EvalResult::to_json() const {
  nlohmann::json j{{"model_id", model_id},
                   {"dataset_id", dataset_id},
                   {"accuracy", accuracy},
                   {"tp", tp},
                   {"tn", tn},
                   {"fp", fp},
                   {"fn", fn},
                   {"n_samples", n_samples}};
  j["per_class_accuracy"] = {
      {"free", std::isnan(per_class_accuracy[0]) ? nlohmann::json(nullptr)
                                                 : nlohmann::json(per_class_accuracy[0])},
      {"busy", std::isnan(per_class_accuracy[1]) ? nlohmann::json(nullptr)
                                                 : nlohmann::json(per_class_accuracy[1])}};
  j["errors"] = nlohmann::json::array();
  for (const auto& e : errors) j["errors"].push_back({{"path", e.path}, {"message", e.message}});
  return j;
}

std::string EvalResult::csv_header() {
  return "model_id,dataset_id,accuracy,accuracy_free,accuracy_busy,tp,tn,fp,fn,"
         "n_samples,n_errors";
}

std::string EvalResult::csv_row() const {
  std::ostringstream out;
  out << model_id << ',' << dataset_id << ',' << num(accuracy) << ','
      << num(per_class_accuracy[0]) << ',' << num(per_class_accuracy[1]) << ',' << tp
      << ',' << tn << ',' << fp << ',' << fn << ',' << n_samples << ','
      << errors.size();
  return out.str();
}

EvalResult evaluate_classifier(const Predictor& predict, const Manifest& test,
                               int input_size, std::string model_id,
                               std::string dataset_id) {
  EvalResult r;
  r.model_id = std::move(model_id);
  r.dataset_id = std::move(dataset_id);
  for (const auto& rec : test.records) {
    Image patch;
    try {
      patch = resize(test.load_image(rec), input_size, input_size);
    } catch (const Error& e) {
      r.errors.push_back({rec.path, e.what()});
      continue;
    }
    const int pred = predicted_class(predict(patch));
    if (rec.label == kBusy) {
      pred == kBusy ? ++r.tp : ++r.fn;
    } else {
      pred == kFree ? ++r.tn : ++r.fp;
    }
  }
  r.n_samples = r.tp + r.tn + r.fp + r.fn;
  r.accuracy = r.n_samples == 0 ? 0.0 : ratio(r.tp + r.tn, r.n_samples);
  r.per_class_accuracy = {ratio(r.tn, r.tn + r.fp), ratio(r.tp, r.tp + r.fn)};
  return r;
}

EvalResult evaluate_classifier(ClassifierNet<float>& net, const Manifest& test,
                               std::string model_id, std::string dataset_id) {
  return evaluate_classifier([&net](const Image& p) { return net.predict(p); }, test,
                             net.spec().input_size, std::move(model_id),
                             std::move(dataset_id));
}

EvalResult evaluate_classifier(PipelineNet<float>& net, const Manifest& test,
                               std::string model_id, std::string dataset_id) {
  return evaluate_classifier([&net](const Image& p) { return net.predict(p); }, test,
                             net.input_size(), std::move(model_id),
                             std::move(dataset_id));
}

double image_mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("image_mse: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

DehazeQuality dehaze_quality(const Dehazer& dehaze, const Manifest& corpus,
                             int input_size) {
  DehazeQuality q;
  auto load = [&](const std::filesystem::path& p) {
    Image img = to_rgb(read_image(p));
    return input_size > 0 ? resize(img, input_size, input_size) : img;
  };
  double mse_sum = 0.0;
  double psnr_sum = 0.0;
  for (const auto& rec : corpus.records) {
    const Image input = load(corpus.resolve(rec));
    Image target;
    if (rec.has_tag("hazy")) {
      const auto t = rec.tag_value("target");
      if (!t) throw DataError("hazy record " + rec.path + " has no paired clear image");
      target = load(corpus.resolve(ManifestRecord{*t, rec.label, {}}));
    } else {
      target = input;
    }
    const double mse = image_mse(dehaze(input), target);
    mse_sum += mse;
    psnr_sum += psnr_from_mse(mse);
    ++q.n_pairs;
  }
  if (q.n_pairs == 0) throw DataError("dehaze_quality: corpus is empty");
  q.mean_mse = mse_sum / static_cast<double>(q.n_pairs);
  q.mean_psnr = psnr_sum / static_cast<double>(q.n_pairs);
  return q;
}

DehazeQuality dehaze_quality(DehazeNet<float>& net, const Manifest& corpus,
                             int input_size) {
  return dehaze_quality([&net](const Image& img) { return dehaze_forward(net, img).clean; },
                        corpus, input_size);
}

nlohmann::json BenchResult::to_json() const {
  return {{"model_id", model_id},       {"mean_seconds", mean_seconds},
          {"std_seconds", std_seconds}, {"min_seconds", min_seconds},
          {"max_seconds", max_seconds}, {"n_patches", n_patches},
          {"n_warmup", n_warmup},       {"hardware", hardware}};
}

std::string BenchResult::csv_header() {
  return "model_id,mean_seconds,std_seconds,min_seconds,max_seconds,n_patches,"
         "n_warmup,hardware";
}

std::string BenchResult::csv_row() const {
  std::string hw = hardware;
  std::replace(hw.begin(), hw.end(), ',', ';');
  std::ostringstream out;
  out << model_id << ',' << num(mean_seconds) << ',' << num(std_seconds) << ','
      << num(min_seconds) << ',' << num(max_seconds) << ',' << n_patches << ','
      << n_warmup << ',' << hw;
  return out.str();
}

std::string hardware_note() {
  std::string model = "unknown cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " logical cores, single-threaded timing";
}

BenchResult bench_runtime(const std::function<void(const Image&)>& forward,
                          const Manifest& patches, int input_size, int n_warmup,
                          int n_timed, std::string model_id) {
  if (n_timed < 1) throw ConfigError("bench needs n_timed >= 1");
  if (n_warmup < 0) throw ConfigError("bench needs n_warmup >= 0");
  if (patches.empty()) throw DataError("bench manifest is empty");
  std::vector<Image> images;
  images.reserve(patches.size());
  for (const auto& r : patches.records) {
    images.push_back(resize(patches.load_image(r), input_size, input_size));
  }
  for (int i = 0; i < n_warmup; ++i) forward(images[static_cast<std::size_t>(i) % images.size()]);

  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_timed));
  for (int i = 0; i < n_timed; ++i) {
    const Image& img = images[static_cast<std::size_t>(i) % images.size()];
    const auto t0 = std::chrono::steady_clock::now();
    forward(img);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }

  BenchResult b;
  b.model_id = std::move(model_id);
  b.n_patches = times.size();
  b.n_warmup = static_cast<std::size_t>(n_warmup);
  double sum = 0.0;
  for (double t : times) sum += t;
  b.mean_seconds = sum / static_cast<double>(times.size());
  double sq = 0.0;
  for (double t : times) sq += (t - b.mean_seconds) * (t - b.mean_seconds);
  b.std_seconds = times.size() > 1 ? std::sqrt(sq / static_cast<double>(times.size() - 1)) : 0.0;
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  b.min_seconds = *lo;
  b.max_seconds = *hi;
  b.hardware = hardware_note();
  return b;
}

ComparisonTable compare_models(std::span<const EvalResult> evals,
                               std::span<const BenchResult> benches) {
  if (evals.empty() && benches.empty()) throw InputError("compare_models needs results");
  constexpr const char* kLatency = "latency_s";
  std::map<std::pair<std::string, std::string>, double> cells;
  std::set<std::string> models;
  std::vector<std::string> columns;
  auto add = [&](const std::string& model, const std::string& column, double v) {
    if (!cells.emplace(std::make_pair(model, column), v).second) {
      throw InputError("duplicate result for model '" + model + "' on '" + column + "'");
    }
    models.insert(model);
    if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
      columns.push_back(column);
    }
  };
  for (const auto& e : evals) add(e.model_id, e.dataset_id, e.accuracy);
  for (const auto& b : benches) add(b.model_id, kLatency, b.mean_seconds);

  ComparisonTable t;
  t.models.assign(models.begin(), models.end());
  t.columns = columns;
  for (const auto& m : t.models) {
    std::vector<double> row;
    for (const auto& c : t.columns) {
      const auto it = cells.find({m, c});
      row.push_back(it == cells.end() ? kNaN : it->second);
    }
    t.cells.push_back(std::move(row));
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "model_id";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < models.size(); ++r) {
    out << models[r];
    for (double v : cells[r]) out << ',' << num(v);
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_markdown() const {
  std::ostringstream out;
  out << "| model |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
  for (std::size_t r = 0; r < models.size(); ++r) {
    out << "| " << models[r] << " |";
    for (double v : cells[r]) out << ' ' << (std::isnan(v) ? "-" : num(v)) << " |";
    out << '\n';
  }
  return out.str();
}

}  // namespace hazepark
