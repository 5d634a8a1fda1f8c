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


// Corpus construction: manifests, slot masks, haze grids, augmentation and
// the procedural toy parking-patch generator.

#ifndef HAZEPARK_DATASETS_HPP_
#define HAZEPARK_DATASETS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazepark/image.hpp"
#include "hazepark/layers.hpp"
#include "hazepark/scatter.hpp"

namespace hazepark {

/// Independent RNG stream for item `index` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

// ---- manifest --------------------------------------------------------------

struct ManifestRecord {
  std::string path;  // relative to the manifest directory, or absolute
  int label = 0;     // 0 = free, 1 = busy
  std::vector<std::string> tags;

  bool has_tag(std::string_view tag) const;
  /// Value of the first "key=value" tag, if any.
  std::optional<std::string> tag_value(std::string_view key) const;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::filesystem::path resolve(const ManifestRecord& r) const;
  /// Decoded as RGB.
  Image load_image(const ManifestRecord& r) const;
  std::size_t count_label(int label) const;
  /// Throws DataError on duplicate paths or labels outside {0, 1}.
  void validate() const;
};

/// CSV with header `path,label,tags`; tags are `|`-separated.
Manifest parse_manifest(std::string_view text,
                        const std::filesystem::path& base_dir);
std::string format_manifest(const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);
/// Record paths are written as given; relative paths resolve against the
/// manifest's directory when read back.
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// ---- slot masks ------------------------------------------------------------

struct Slot {
  std::string id;
  std::array<std::array<double, 2>, 4> quad{};  // (x, y) pixel corners
};

struct SlotMask {
  std::string camera_id;
  std::vector<Slot> slots;

  nlohmann::json to_json() const;
  /// Throws MaskError on malformed entries or duplicate slot ids.
  static SlotMask from_json(const nlohmann::json& j);
};

SlotMask read_slot_mask(const std::filesystem::path& path);
void write_slot_mask(const std::filesystem::path& path, const SlotMask& mask);

struct SlotPatch {
  std::string slot_id;
  Image patch;
};

/// Crops each quad's axis-aligned bounding box and resizes it to
/// `patch_size` square, in mask order. A quad leaving the frame throws
/// MaskError naming the slot.
std::vector<SlotPatch> extract_slots(const Image& frame, const SlotMask& mask,
                                     int patch_size = 224);

// ---- haze synthesis --------------------------------------------------------

struct HazeGrid {
  std::vector<double> airlights;
  std::vector<double> betas;

  /// A in 0.8..1.0 step 0.05, beta in {0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2}.
  static HazeGrid standard();
  std::size_t size() const noexcept { return airlights.size() * betas.size(); }
  /// Throws ConfigError when empty or out of range.
  void validate() const;
};

/// d(x, y) = d0 + slope * y.
DepthMap ramp_depth(int height, int width, double d0, double slope);
/// Radial bowl: d_center at the center rising to d_edge at the corners.
DepthMap bowl_depth(int height, int width, double d_center, double d_edge);

/// Parses "ramp:<d0>:<slope>" or "bowl:<center>:<edge>". Throws InputError.
DepthMap depth_from_spec(std::string_view spec, int height, int width);
/// A random ramp or bowl spec with depths inside [2, 8].
std::string random_depth_spec(Rng& rng, int height);

struct HazeCorpusOptions {
  std::uint64_t seed = 0;
  /// When a source has no `depth=` tag, draw a procedural depth from the
  /// record's stream instead of failing.
  bool procedural_depth = false;
  /// List the clear original of each source in the manifest. The clear file
  /// is written either way, since hazy records name it as their target.
  bool include_clear = true;
};

/// Emits |A| * |beta| hazy variants (plus the clear original) per source
/// record. Each output is tagged `hazy` or `clear` and `source=<id>` shared
/// by all outputs of one source; hazy outputs add `A=`, `beta=` and
/// `target=<clear path>`. Writes PNGs and
/// `manifest.csv` into out_dir and returns the manifest.
Manifest build_haze_corpus(const Manifest& sources, const HazeGrid& grid,
                           const std::filesystem::path& out_dir,
                           const HazeCorpusOptions& options = {});

// ---- augmentation ----------------------------------------------------------

/// One augmented variant: h-flip (p = 0.5), a 90% x 90% crop at a uniform
/// offset resized back to the source size, and for free patches (label 0)
/// an extra v-flip (p = 0.5). Throws InputError below 10x10.
Image augment_one(const Image& src, int label, Rng& rng);

/// `multiplier` variants per record, deterministic in `seed`.
Manifest augment_patches(const Manifest& in, const std::filesystem::path& out_dir,
                         int multiplier, std::uint64_t seed);

// ---- toy corpus ------------------------------------------------------------

struct ToyCorpus {
  Manifest train;
  Manifest test;
};

/// Busy patch: asphalt texture with a dark rounded car body and a specular
/// highlight. Free patch: asphalt texture, sometimes with a lane line.
Image render_toy_patch(int label, int size, Rng& rng);

/// Renders n_per_class patches of each class (n_per_class >= 10), each with
/// a `depth=` tag, and splits every class 70/30 into train.csv / test.csv.
ToyCorpus make_toy_corpus(int n_per_class, std::uint64_t seed,
                          const std::filesystem::path& out_dir, int size = 32);

}  // namespace hazepark

#endif  // HAZEPARK_DATASETS_HPP_
