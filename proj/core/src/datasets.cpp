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


#include "hazepark/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "hazepark/codec.hpp"
#include "hazepark/error.hpp"

namespace hazepark {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_index(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// One CSV row with RFC 4180 quoting. Advances `pos` past the row terminator.
std::vector<std::string> read_csv_row(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char ch = text[pos++];
    if (quoted) {
      if (ch == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted) throw FormatError("manifest: unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

bool is_generated_tag(const std::string& tag) {
  return tag == "clear" || tag == "hazy" || tag.rfind("A=", 0) == 0 ||
         tag.rfind("beta=", 0) == 0 || tag.rfind("source=", 0) == 0 ||
         tag.rfind("target=", 0) == 0;
}

double parse_number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("cannot parse ") + what + " '" + s + "'");
  }
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

// ---- manifest --------------------------------------------------------------

bool ManifestRecord::has_tag(std::string_view tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

std::optional<std::string> ManifestRecord::tag_value(std::string_view key) const {
  for (const auto& t : tags) {
    if (t.size() > key.size() && t.compare(0, key.size(), key) == 0 &&
        t[key.size()] == '=') {
      return t.substr(key.size() + 1);
    }
  }
  return std::nullopt;
}

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
  const std::filesystem::path p(r.path);
  return p.is_absolute() ? p : base_dir / p;
}

Image Manifest::load_image(const ManifestRecord& r) const {
  return to_rgb(read_image(resolve(r)));
}

std::size_t Manifest::count_label(int label) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(),
      [label](const ManifestRecord& r) { return r.label == label; }));
}

void Manifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.label != 0 && r.label != 1) {
      throw DataError("manifest: label must be 0 or 1 for " + r.path);
    }
    if (!seen.insert(r.path).second) {
      throw DataError("manifest: duplicate path " + r.path);
    }
  }
}

Manifest parse_manifest(std::string_view text,
                        const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::size_t pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  const auto header = read_csv_row(text, pos);
  if (header.size() < 2 || header[0] != "path" || header[1] != "label") {
    throw FormatError("manifest: header must be path,label,tags");
  }
  std::size_t line = 1;
  while (pos < text.size()) {
    ++line;
    const auto row = read_csv_row(text, pos);
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 2 || row.size() > 3) {
      throw FormatError("manifest: line " + std::to_string(line) +
                        " needs 2 or 3 fields");
    }
    ManifestRecord r;
    r.path = row[0];
    if (row[1] == "0") {
      r.label = 0;
    } else if (row[1] == "1") {
      r.label = 1;
    } else {
      throw DataError("manifest: line " + std::to_string(line) +
                      " has label '" + row[1] + "'");
    }
    if (row.size() == 3 && !row[2].empty()) r.tags = split(row[2], '|');
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

std::string format_manifest(const Manifest& m) {
  std::string out = "path,label,tags\n";
  for (const auto& r : m.records) {
    std::string tags;
    for (std::size_t i = 0; i < r.tags.size(); ++i) {
      if (i) tags.push_back('|');
      tags += r.tags[i];
    }
    out += csv_field(r.path) + "," + std::to_string(r.label) + "," +
           csv_field(tags) + "\n";
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size());
  try {
    return parse_manifest(text, path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  const std::string text = format_manifest(m);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                             text.size()));
}

// ---- slot masks ------------------------------------------------------------

nlohmann::json SlotMask::to_json() const {
  nlohmann::json j;
  j["camera_id"] = camera_id;
  j["slots"] = nlohmann::json::array();
  for (const auto& s : slots) {
    nlohmann::json quad = nlohmann::json::array();
    for (const auto& p : s.quad) quad.push_back({p[0], p[1]});
    j["slots"].push_back({{"id", s.id}, {"quad", quad}});
  }
  return j;
}

SlotMask SlotMask::from_json(const nlohmann::json& j) {
  SlotMask mask;
  try {
    if (j.contains("camera_id")) {
      const auto& cam = j["camera_id"];
      mask.camera_id = cam.is_string() ? cam.get<std::string>() : cam.dump();
    }
    std::set<std::string> ids;
    for (const auto& entry : j.at("slots")) {
      Slot s;
      const auto& id = entry.at("id");
      s.id = id.is_string() ? id.get<std::string>() : id.dump();
      const auto& quad = entry.at("quad");
      if (!quad.is_array() || quad.size() != 4) {
        throw MaskError("slot " + s.id + ": quad needs 4 points");
      }
      for (std::size_t k = 0; k < 4; ++k) {
        if (!quad[k].is_array() || quad[k].size() != 2) {
          throw MaskError("slot " + s.id + ": quad points are [x, y] pairs");
        }
        s.quad[k] = {quad[k][0].get<double>(), quad[k][1].get<double>()};
        if (!std::isfinite(s.quad[k][0]) || !std::isfinite(s.quad[k][1])) {
          throw MaskError("slot " + s.id + ": non-finite coordinate");
        }
      }
      if (!ids.insert(s.id).second) {
        throw MaskError("duplicate slot id " + s.id);
      }
      mask.slots.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MaskError(std::string("slot mask: ") + e.what());
  }
  return mask;
}

SlotMask read_slot_mask(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw MaskError(path.string() + ": " + e.what());
  }
  return SlotMask::from_json(j);
}

void write_slot_mask(const std::filesystem::path& path, const SlotMask& mask) {
  const std::string text = mask.to_json().dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                             text.size()));
}

std::vector<SlotPatch> extract_slots(const Image& frame, const SlotMask& mask,
                                     int patch_size) {
  const Image rgb = to_rgb(frame);
  std::vector<SlotPatch> out;
  out.reserve(mask.slots.size());
  for (const auto& s : mask.slots) {
    double x0 = s.quad[0][0], x1 = x0, y0 = s.quad[0][1], y1 = y0;
    for (const auto& p : s.quad) {
      x0 = std::min(x0, p[0]);
      x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]);
      y1 = std::max(y1, p[1]);
    }
    if (x0 < 0 || y0 < 0 || x1 > frame.width() || y1 > frame.height()) {
      throw MaskError("slot " + s.id + ": quad leaves the " +
                      std::to_string(frame.width()) + "x" +
                      std::to_string(frame.height()) + " frame");
    }
    // Quad corners are pixel-edge coordinates; the box covers every pixel
    // the quad touches.
    const int left = static_cast<int>(std::floor(x0));
    const int top = static_cast<int>(std::floor(y0));
    const int right = std::max(left + 1, static_cast<int>(std::ceil(x1)));
    const int bottom = std::max(top + 1, static_cast<int>(std::ceil(y1)));
    if (right > frame.width() || bottom > frame.height()) {
      throw MaskError("slot " + s.id + ": degenerate quad on the frame edge");
    }
    const Image box = crop(rgb, top, left, bottom - top, right - left);
    out.push_back({s.id, resize(box, patch_size, patch_size)});
  }
  return out;
}

// ---- haze synthesis --------------------------------------------------------

HazeGrid HazeGrid::standard() {
  return {{0.8, 0.85, 0.9, 0.95, 1.0}, {0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2}};
}

void HazeGrid::validate() const {
  if (airlights.empty() || betas.empty()) {
    throw ConfigError("haze grid needs at least one A and one beta");
  }
  for (double a : airlights) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ConfigError("haze grid A must lie in [0,1], got " + fmt_double(a));
    }
  }
  for (double b : betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw ConfigError("haze grid beta must be >= 0, got " + fmt_double(b));
    }
  }
}

DepthMap ramp_depth(int height, int width, double d0, double slope) {
  std::vector<float> d(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    std::fill_n(d.begin() + static_cast<std::ptrdiff_t>(y) * width, width,
                static_cast<float>(d0 + slope * y));
  }
  return DepthMap(height, width, std::move(d));
}

DepthMap bowl_depth(int height, int width, double d_center, double d_edge) {
  const double cy = (height - 1) / 2.0;
  const double cx = (width - 1) / 2.0;
  const double rmax = std::max(std::hypot(cy, cx), 1e-12);
  std::vector<float> d(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double r = std::hypot(y - cy, x - cx) / rmax;
      d[static_cast<std::size_t>(y) * width + x] =
          static_cast<float>(d_center + (d_edge - d_center) * r * r);
    }
  }
  return DepthMap(height, width, std::move(d));
}

DepthMap depth_from_spec(std::string_view spec, int height, int width) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) {
    throw InputError("depth spec '" + std::string(spec) +
                     "' is not kind:a:b");
  }
  const double a = parse_number(parts[1], "depth parameter");
  const double b = parse_number(parts[2], "depth parameter");
  try {
    if (parts[0] == "ramp") {
      // slope is per pixel row of a height-`height` image
      return ramp_depth(height, width, a, b);
    }
    if (parts[0] == "bowl") return bowl_depth(height, width, a, b);
  } catch (const DomainError& e) {
    throw InputError("depth spec '" + std::string(spec) + "': " + e.what());
  }
  throw InputError("unknown depth kind '" + parts[0] + "'");
}

std::string random_depth_spec(Rng& rng, int height) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d0 = 2.0 + 4.0 * u(rng);
  if (u(rng) < 0.5) {
    const double span = (8.0 - d0) * u(rng);
    const double slope = height > 1 ? span / (height - 1) : 0.0;
    return "ramp:" + fmt_double(d0) + ":" + fmt_double(slope);
  }
  const double edge = d0 + (8.0 - d0) * u(rng);
  return "bowl:" + fmt_double(d0) + ":" + fmt_double(edge);
}

Manifest build_haze_corpus(const Manifest& sources, const HazeGrid& grid,
                           const std::filesystem::path& out_dir,
                           const HazeCorpusOptions& options) {
  grid.validate();
  Manifest out;
  out.base_dir = out_dir;
  for (std::size_t i = 0; i < sources.records.size(); ++i) {
    const auto& src = sources.records[i];
    const Image clear = sources.load_image(src);
    std::string depth_spec;
    if (auto tag = src.tag_value("depth")) {
      depth_spec = *tag;
    } else if (options.procedural_depth) {
      Rng rng = make_stream(options.seed, i);
      depth_spec = random_depth_spec(rng, clear.height());
    } else {
      throw InputError("no depth for source " + src.path);
    }
    const DepthMap depth =
        depth_from_spec(depth_spec, clear.height(), clear.width());

    const std::string id = fmt_index("s", i, 5);
    std::vector<std::string> base_tags;
    for (const auto& t : src.tags) {
      if (!is_generated_tag(t) && t.rfind("depth=", 0) != 0) base_tags.push_back(t);
    }
    base_tags.push_back("source=" + id);
    base_tags.push_back("depth=" + depth_spec);

    // The clear file is always written: hazy records point at it as their
    // training target even when it is not listed.
    const std::string clear_path = id + "_clear.png";
    write_png(out_dir / clear_path, clear);
    if (options.include_clear) {
      ManifestRecord r{clear_path, src.label, base_tags};
      r.tags.insert(r.tags.begin(), "clear");
      out.records.push_back(std::move(r));
    }
    for (double a : grid.airlights) {
      for (double beta : grid.betas) {
        const HazeParams params{a, beta};
        const Image hazy = synthesize_haze(clear, transmission(depth, params), params);
        ManifestRecord r{id + "_A" + fmt_double(a) + "_beta" + fmt_double(beta) + ".png",
                         src.label, base_tags};
        r.tags.insert(r.tags.begin(),
                      {"hazy", "A=" + fmt_double(a), "beta=" + fmt_double(beta)});
        r.tags.push_back("target=" + clear_path);
        write_png(out_dir / r.path, hazy);
        out.records.push_back(std::move(r));
      }
    }
  }
  out.validate();
  write_manifest(out_dir / "manifest.csv", out);
  return out;
}

// ---- augmentation ----------------------------------------------------------

Image augment_one(const Image& src, int label, Rng& rng) {
  if (src.height() < 10 || src.width() < 10) {
    throw InputError("augmentation needs patches of at least 10x10, got " +
                     std::to_string(src.height()) + "x" +
                     std::to_string(src.width()));
  }
  std::bernoulli_distribution coin(0.5);
  Image img = coin(rng) ? flip_h(src) : src;
  const int ch = static_cast<int>(std::lround(0.9 * src.height()));
  const int cw = static_cast<int>(std::lround(0.9 * src.width()));
  std::uniform_int_distribution<int> dy(0, src.height() - ch);
  std::uniform_int_distribution<int> dx(0, src.width() - cw);
  const int top = dy(rng);
  const int left = dx(rng);
  img = resize(crop(img, top, left, ch, cw), src.height(), src.width());
  if (label == 0 && coin(rng)) img = flip_v(img);
  return img;
}

Manifest augment_patches(const Manifest& in, const std::filesystem::path& out_dir,
                         int multiplier, std::uint64_t seed) {
  if (multiplier < 1) throw ConfigError("augmentation multiplier must be >= 1");
  Manifest out;
  out.base_dir = out_dir;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& src = in.records[i];
    const Image img = in.load_image(src);
    Rng rng = make_stream(seed, i);
    for (int k = 0; k < multiplier; ++k) {
      ManifestRecord r{fmt_index("a", i, 5) + "_" + fmt_index("", k, 2) + ".png",
                       src.label, src.tags};
      r.tags.push_back("aug");
      write_png(out_dir / r.path, augment_one(img, src.label, rng));
      out.records.push_back(std::move(r));
    }
  }
  write_manifest(out_dir / "manifest.csv", out);
  return out;
}

// ---- toy corpus ------------------------------------------------------------

Image render_toy_patch(int label, int size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.035);
  Image img(size, size, 3);

  const double base = 0.38 + 0.17 * u(rng);
  const double tint[3] = {0.01 * (u(rng) - 0.5), 0.01 * (u(rng) - 0.5),
                          0.02 * (u(rng) - 0.5)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double n = noise(rng);
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(base + tint[c] + n);
      }
    }
  }

  if (label == 0) {
    if (u(rng) < 0.5) {
      const int thickness = std::max(1, size / 16);
      const bool vertical = u(rng) < 0.5;
      const int at = u(rng) < 0.5 ? static_cast<int>(0.05 * size)
                                  : size - thickness - static_cast<int>(0.05 * size);
      const double paint = 0.85 + 0.1 * u(rng);
      for (int a = 0; a < size; ++a) {
        for (int t = 0; t < thickness; ++t) {
          const int y = vertical ? a : at + t;
          const int x = vertical ? at + t : a;
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(paint);
        }
      }
    }
  } else {
    const double w = (0.55 + 0.25 * u(rng)) * size;
    const double h = (0.6 + 0.25 * u(rng)) * size;
    const double cx = size / 2.0 + (u(rng) - 0.5) * 0.2 * size;
    const double cy = size / 2.0 + (u(rng) - 0.5) * 0.2 * size;
    const double radius = 0.2 * std::min(w, h);
    const double body[3] = {0.05 + 0.2 * u(rng), 0.05 + 0.2 * u(rng),
                            0.05 + 0.2 * u(rng)};
    const double hx = cx + (u(rng) - 0.5) * 0.4 * w;
    const double hy = cy + (u(rng) - 0.5) * 0.4 * h;
    const double hr = 0.12 * std::min(w, h);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        // Signed distance to a rounded rectangle.
        const double qx = std::abs(x + 0.5 - cx) - (w / 2 - radius);
        const double qy = std::abs(y + 0.5 - cy) - (h / 2 - radius);
        const double dist = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) +
                            std::min(std::max(qx, qy), 0.0) - radius;
        if (dist > 0) continue;
        const double spec = std::hypot(x + 0.5 - hx, y + 0.5 - hy) < hr ? 1.0 : 0.0;
        for (int c = 0; c < 3; ++c) {
          const double v = spec > 0 ? 0.9 + 0.08 * u(rng) : body[c] + 0.5 * noise(rng);
          img.at(y, x, c) = static_cast<float>(v);
        }
      }
    }
  }
  img.clamp01();
  return img;
}

ToyCorpus make_toy_corpus(int n_per_class, std::uint64_t seed,
                          const std::filesystem::path& out_dir, int size) {
  if (n_per_class < 10) {
    throw ConfigError("toy corpus needs n_per_class >= 10, got " +
                      std::to_string(n_per_class));
  }
  if (size < 10) throw ConfigError("toy patch size must be >= 10");
  ToyCorpus corpus;
  corpus.train.base_dir = out_dir;
  corpus.test.base_dir = out_dir;
  const std::size_t n = static_cast<std::size_t>(n_per_class);
  const auto n_train = static_cast<std::size_t>(std::lround(0.7 * n_per_class));
  for (int label = 0; label <= 1; ++label) {
    const char* name = label == 0 ? "images/free_" : "images/busy_";
    std::vector<ManifestRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(label) * n + i);
      const Image patch = render_toy_patch(label, size, rng);
      ManifestRecord r{fmt_index(name, i, 5) + ".png", label,
                       {"clear", "depth=" + random_depth_spec(rng, size)}};
      write_png(out_dir / r.path, patch);
      records.push_back(std::move(r));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng = make_stream(seed, 2 * n + static_cast<std::uint64_t>(label));
    std::shuffle(order.begin(), order.end(), split_rng);
    for (std::size_t k = 0; k < n; ++k) {
      auto& dest = k < n_train ? corpus.train : corpus.test;
      dest.records.push_back(records[order[k]]);
    }
  }
  write_manifest(out_dir / "train.csv", corpus.train);
  write_manifest(out_dir / "test.csv", corpus.test);
  return corpus;
}

}  // namespace hazepark
