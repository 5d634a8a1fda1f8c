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
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hazepark/codec.hpp"
#include "hazepark/error.hpp"
#include "test_support.hpp"

namespace hazepark {
namespace {

using testutil::ScratchDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Image solid(int h, int w, float r, float g, float b) {
  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

// ---- manifest ----

TEST(Manifest, ParsesQuotedFieldsAndTags) {
  const std::string text =
      "path,label,tags\n"
      "a.png,0,clear|depth=ramp:2:0.1\n"
      "\"dir,with,commas/b.png\",1,\n"
      "\"say \"\"hi\"\".png\",1\n";
  const Manifest m = parse_manifest(text, "/base");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.records[0].path, "a.png");
  EXPECT_EQ(m.records[0].label, 0);
  EXPECT_TRUE(m.records[0].has_tag("clear"));
  EXPECT_FALSE(m.records[0].has_tag("hazy"));
  EXPECT_EQ(m.records[0].tag_value("depth"), "ramp:2:0.1");
  EXPECT_FALSE(m.records[0].tag_value("source").has_value());
  EXPECT_EQ(m.records[1].path, "dir,with,commas/b.png");
  EXPECT_TRUE(m.records[1].tags.empty());
  EXPECT_EQ(m.records[2].path, "say \"hi\".png");
  EXPECT_EQ(m.count_label(1), 2u);
  EXPECT_EQ(m.resolve(m.records[0]), std::filesystem::path("/base/a.png"));
}

TEST(Manifest, FormatParseRoundTrip) {
  Manifest m;
  m.records = {{"x,y.png", 1, {"hazy", "A=0.8"}}, {"q\"z.png", 0, {}}};
  const Manifest back = parse_manifest(format_manifest(m), "");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].path, m.records[i].path);
    EXPECT_EQ(back.records[i].label, m.records[i].label);
    EXPECT_EQ(back.records[i].tags, m.records[i].tags);
  }
}

TEST(Manifest, SkipsBomAndBlankLines) {
  const Manifest m = parse_manifest("\xEF\xBB\xBFpath,label,tags\n\na.png,1,\n", "");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.records[0].label, 1);
}

TEST(Manifest, RejectsBadInput) {
  EXPECT_THROW(parse_manifest("file,label\na.png,0\n", ""), FormatError);
  EXPECT_THROW(parse_manifest("path,label,tags\na.png\n", ""), FormatError);
  EXPECT_THROW(parse_manifest("path,label,tags\na.png,2,\n", ""), DataError);
  EXPECT_THROW(parse_manifest("path,label,tags\na.png,busy,\n", ""), DataError);
  EXPECT_THROW(parse_manifest("path,label,tags\na.png,0,\na.png,1,\n", ""), DataError);
}

TEST(Manifest, FileRoundTripResolvesAgainstDirectory) {
  ScratchDir dir("manifest");
  Manifest m;
  m.records = {{"img/a.png", 0, {"clear"}}};
  write_manifest(dir / "m.csv", m);
  const Manifest back = read_manifest(dir / "m.csv");
  EXPECT_EQ(back.resolve(back.records[0]), dir.path() / "img/a.png");
  EXPECT_THROW(read_manifest(dir / "missing.csv"), IoError);
}

// ---- slot masks ----

TEST(SlotMask, JsonRoundTrip) {
  SlotMask mask;
  mask.camera_id = "cam7";
  mask.slots = {{"s1", {{{0, 0}, {4, 0}, {4, 3}, {0, 3}}}},
                {"s2", {{{5.5, 1}, {9, 1}, {9, 6}, {5.5, 6}}}}};
  const SlotMask back = SlotMask::from_json(mask.to_json());
  EXPECT_EQ(back.camera_id, "cam7");
  ASSERT_EQ(back.slots.size(), 2u);
  EXPECT_EQ(back.slots[1].id, "s2");
  EXPECT_EQ(back.slots[1].quad, mask.slots[1].quad);
}

TEST(SlotMask, NumericIdsBecomeStrings) {
  const auto j = nlohmann::json::parse(
      R"({"camera_id": 3, "slots": [{"id": 12, "quad": [[0,0],[1,0],[1,1],[0,1]]}]})");
  const SlotMask mask = SlotMask::from_json(j);
  EXPECT_EQ(mask.camera_id, "3");
  EXPECT_EQ(mask.slots[0].id, "12");
}

TEST(SlotMask, RejectsMalformedEntries) {
  const auto bad = [](const char* text) {
    return SlotMask::from_json(nlohmann::json::parse(text));
  };
  EXPECT_THROW(bad(R"({"camera_id": "c"})"), MaskError);
  EXPECT_THROW(bad(R"({"slots": [{"id": "a", "quad": [[0,0],[1,0],[1,1]]}]})"), MaskError);
  EXPECT_THROW(bad(R"({"slots": [{"id": "a", "quad": [[0,0],[1,0],[1,1],[0]]}]})"),
               MaskError);
  EXPECT_THROW(bad(R"({"slots": [{"id": "a", "quad": [[0,0],[1,0],[1,1],["x",1]]}]})"),
               MaskError);
  EXPECT_THROW(bad(R"({"slots": [{"id": "a", "quad": [[0,0],[1,0],[1,1],[0,1]]},
                                 {"id": "a", "quad": [[0,0],[1,0],[1,1],[0,1]]}]})"),
               MaskError);
}

TEST(SlotMask, MissingFileIsIoError) {
  ScratchDir dir("mask");
  EXPECT_THROW(read_slot_mask(dir / "none.json"), IoError);
}

TEST(ExtractSlots, FollowsMaskOrderAndCropsBoxes) {
  // Left half red, right half blue; slots listed right-to-left.
  Image frame(20, 40, 3);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 40; ++x) {
      frame.at(y, x, x < 20 ? 0 : 2) = 1.0f;
    }
  }
  SlotMask mask;
  mask.slots = {{"right", {{{22, 2}, {38, 3}, {37, 18}, {23, 17}}}},
                {"left", {{{1, 1}, {18, 1}, {18, 19}, {1, 19}}}}};
  const auto patches = extract_slots(frame, mask, 16);
  ASSERT_EQ(patches.size(), 2u);
  EXPECT_EQ(patches[0].slot_id, "right");
  EXPECT_EQ(patches[1].slot_id, "left");
  for (const auto& p : patches) {
    EXPECT_EQ(p.patch.height(), 16);
    EXPECT_EQ(p.patch.width(), 16);
    EXPECT_EQ(p.patch.channels(), 3);
  }
  EXPECT_EQ(patches[0].patch, solid(16, 16, 0, 0, 1));
  EXPECT_EQ(patches[1].patch, solid(16, 16, 1, 0, 0));
}

TEST(ExtractSlots, BoxMatchesDirectCropAndResize) {
  Rng rng(5);
  const Image frame = testutil::random_image(30, 40, 3, rng);
  SlotMask mask;
  mask.slots = {{"a", {{{3.2, 4.7}, {17.9, 5}, {17, 20.1}, {4, 19}}}}};
  const auto patches = extract_slots(frame, mask, 24);
  // Pixel-edge corners: covered pixels are x in [3, 18), y in [4, 21).
  EXPECT_EQ(patches[0].patch, resize(crop(frame, 4, 3, 17, 15), 24, 24));
}

TEST(ExtractSlots, GrayFrameIsPromoted) {
  const Image gray(10, 10, 1, 0.25f);
  SlotMask mask;
  mask.slots = {{"g", {{{0, 0}, {10, 0}, {10, 10}, {0, 10}}}}};
  const auto patches = extract_slots(gray, mask, 8);
  EXPECT_EQ(patches[0].patch, solid(8, 8, 0.25f, 0.25f, 0.25f));
}

TEST(ExtractSlots, QuadOutsideFrameNamesSlot) {
  const Image frame(10, 10, 3);
  SlotMask mask;
  mask.slots = {{"ok", {{{0, 0}, {5, 0}, {5, 5}, {0, 5}}}},
                {"bad7", {{{6, 6}, {11, 6}, {11, 9}, {6, 9}}}}};
  try {
    extract_slots(frame, mask, 8);
    FAIL() << "expected MaskError";
  } catch (const MaskError& e) {
    EXPECT_NE(std::string(e.what()).find("bad7"), std::string::npos);
  }
}

TEST(ExtractSlots, EmptyMaskGivesNoPatches) {
  EXPECT_TRUE(extract_slots(Image(10, 10, 3), SlotMask{}, 8).empty());
}

// ---- haze grid and depth ----

TEST(HazeGrid, StandardGridHasThirtyFiveCombinations) {
  const HazeGrid g = HazeGrid::standard();
  EXPECT_EQ(g.airlights, (std::vector<double>{0.8, 0.85, 0.9, 0.95, 1.0}));
  EXPECT_EQ(g.betas, (std::vector<double>{0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2}));
  EXPECT_EQ(g.size(), 35u);
  EXPECT_NO_THROW(g.validate());
}

TEST(HazeGrid, ValidateRejectsBadValues) {
  EXPECT_THROW((HazeGrid{{}, {0.1}}).validate(), ConfigError);
  EXPECT_THROW((HazeGrid{{0.9}, {}}).validate(), ConfigError);
  EXPECT_THROW((HazeGrid{{1.2}, {0.1}}).validate(), ConfigError);
  EXPECT_THROW((HazeGrid{{0.9}, {-0.1}}).validate(), ConfigError);
  EXPECT_THROW((HazeGrid{{0.9}, {std::nan("")}}).validate(), ConfigError);
}

TEST(Depth, RampAndBowlValues) {
  const DepthMap ramp = depth_from_spec("ramp:2:0.5", 4, 3);
  EXPECT_FLOAT_EQ(ramp.at(0, 2), 2.0f);
  EXPECT_FLOAT_EQ(ramp.at(3, 0), 3.5f);
  const DepthMap bowl = depth_from_spec("bowl:2:6", 5, 5);
  EXPECT_FLOAT_EQ(bowl.at(2, 2), 2.0f);
  EXPECT_FLOAT_EQ(bowl.at(0, 0), 6.0f);
  EXPECT_FLOAT_EQ(bowl.at(4, 4), 6.0f);
  // r^2 = (2^2 + 0) / 8 = 0.5 at the edge midpoint
  EXPECT_FLOAT_EQ(bowl.at(0, 2), 4.0f);
}

TEST(Depth, BadSpecsAreInputErrors) {
  EXPECT_THROW(depth_from_spec("ramp:2", 4, 4), InputError);
  EXPECT_THROW(depth_from_spec("cone:1:2", 4, 4), InputError);
  EXPECT_THROW(depth_from_spec("ramp:x:1", 4, 4), InputError);
}

TEST(Depth, RandomSpecsStayInRange) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const std::string spec = random_depth_spec(rng, 32);
    const DepthMap d = depth_from_spec(spec, 32, 32);
    const auto [lo, hi] = std::minmax_element(d.data().begin(), d.data().end());
    EXPECT_GE(*lo, 2.0f - 1e-5f) << spec;
    EXPECT_LE(*hi, 8.0f + 1e-4f) << spec;
  }
}

// ---- haze corpus ----

Manifest write_sources(const ScratchDir& dir) {
  Rng rng(3);
  Manifest m;
  m.base_dir = dir.path();
  write_png(dir / "a.png", quantize8(testutil::random_image(12, 10, 3, rng)));
  write_png(dir / "b.png", quantize8(testutil::random_image(12, 10, 3, rng)));
  m.records = {{"a.png", 1, {"depth=ramp:2:0.3", "cam=1"}},
               {"b.png", 0, {"depth=bowl:3:7"}}};
  return m;
}

TEST(HazeCorpus, EmitsEveryGridVariantPerSource) {
  ScratchDir src("haze_src");
  ScratchDir out("haze_out");
  const Manifest sources = write_sources(src);
  const Manifest corpus = build_haze_corpus(sources, HazeGrid::standard(), out.path());
  ASSERT_EQ(corpus.size(), 2u * (35 + 1));
  std::set<std::string> sources_seen;
  std::set<std::pair<std::string, std::string>> combos;
  std::size_t clear = 0;
  for (const auto& r : corpus.records) {
    EXPECT_TRUE(std::filesystem::exists(corpus.resolve(r))) << r.path;
    const auto source = r.tag_value("source");
    ASSERT_TRUE(source.has_value());
    sources_seen.insert(*source);
    EXPECT_EQ(r.label, *source == "s00000" ? 1 : 0);
    if (r.has_tag("clear")) {
      ++clear;
      continue;
    }
    ASSERT_TRUE(r.has_tag("hazy"));
    combos.insert({*source + *r.tag_value("A"), *r.tag_value("beta")});
    const auto target = r.tag_value("target");
    ASSERT_TRUE(target.has_value());
    EXPECT_TRUE(std::filesystem::exists(out / *target));
  }
  EXPECT_EQ(clear, 2u);
  EXPECT_EQ(sources_seen.size(), 2u);
  EXPECT_EQ(combos.size(), 70u);
  EXPECT_EQ(read_manifest(out / "manifest.csv").size(), corpus.size());
}

TEST(HazeCorpus, HazyPixelsFollowScatteringModel) {
  ScratchDir src("haze_src");
  ScratchDir out("haze_out");
  const Manifest sources = write_sources(src);
  const Manifest corpus =
      build_haze_corpus(sources, HazeGrid{{0.85}, {0.12}}, out.path());
  const Image clear = sources.load_image(sources.records[0]);
  const auto it = std::find_if(corpus.records.begin(), corpus.records.end(),
                               [](const ManifestRecord& r) {
                                 return r.has_tag("hazy") && r.tag_value("source") == "s00000";
                               });
  ASSERT_NE(it, corpus.records.end());
  const Image hazy = corpus.load_image(*it);
  for (int y = 0; y < clear.height(); ++y) {
    const double t = std::exp(-0.12 * (2.0 + 0.3 * y));
    for (int x = 0; x < clear.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double expect = clear.at(y, x, c) * t + 0.85 * (1 - t);
        EXPECT_NEAR(hazy.at(y, x, c), expect, 0.5 / 255 + 1e-6);
      }
    }
  }
}

TEST(HazeCorpus, ExcludedClearStillWritten) {
  ScratchDir src("haze_src");
  ScratchDir out("haze_out");
  HazeCorpusOptions opt;
  opt.include_clear = false;
  const Manifest corpus =
      build_haze_corpus(write_sources(src), HazeGrid{{0.9}, {0.05, 0.1}}, out.path(), opt);
  EXPECT_EQ(corpus.size(), 4u);
  for (const auto& r : corpus.records) {
    EXPECT_FALSE(r.has_tag("clear"));
    EXPECT_TRUE(std::filesystem::exists(out / *r.tag_value("target")));
  }
}

TEST(HazeCorpus, MissingDepthNeedsProceduralOption) {
  ScratchDir src("haze_src");
  ScratchDir out("haze_out");
  Manifest sources = write_sources(src);
  sources.records[1].tags.clear();
  EXPECT_THROW(build_haze_corpus(sources, HazeGrid{{0.9}, {0.1}}, out.path()), InputError);
  HazeCorpusOptions opt;
  opt.procedural_depth = true;
  opt.seed = 4;
  const Manifest a = build_haze_corpus(sources, HazeGrid{{0.9}, {0.1}}, out.path(), opt);
  EXPECT_EQ(a.size(), 4u);
  EXPECT_TRUE(a.records[3].tag_value("depth").has_value());
}

TEST(HazeCorpus, InvalidGridRejectedBeforeWriting) {
  ScratchDir src("haze_src");
  ScratchDir out("haze_out");
  EXPECT_THROW(build_haze_corpus(write_sources(src), HazeGrid{{}, {0.1}}, out.path()),
               ConfigError);
  EXPECT_FALSE(std::filesystem::exists(out / "manifest.csv"));
}

// ---- augmentation ----

TEST(Augment, DeterministicInSeed) {
  ScratchDir src("aug_src");
  ScratchDir a("aug_a");
  ScratchDir b("aug_b");
  ScratchDir c("aug_c");
  const Manifest sources = write_sources(src);
  const Manifest ma = augment_patches(sources, a.path(), 3, 9);
  const Manifest mb = augment_patches(sources, b.path(), 3, 9);
  const Manifest mc = augment_patches(sources, c.path(), 3, 10);
  ASSERT_EQ(ma.size(), 6u);
  bool any_diff = false;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    EXPECT_EQ(ma.records[i].path, mb.records[i].path);
    EXPECT_EQ(ma.records[i].label, sources.records[i / 3].label);
    EXPECT_TRUE(ma.records[i].has_tag("aug"));
    EXPECT_EQ(slurp(a / ma.records[i].path), slurp(b / mb.records[i].path));
    any_diff |= slurp(a / ma.records[i].path) != slurp(c / mc.records[i].path);
  }
  EXPECT_TRUE(any_diff);
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
}

TEST(Augment, RejectsBadArguments) {
  ScratchDir dir("aug");
  EXPECT_THROW(augment_patches(Manifest{}, dir.path(), 0, 1), ConfigError);
  Rng rng(1);
  EXPECT_THROW(augment_one(Image(9, 20, 3), 0, rng), InputError);
}

TEST(Augment, PreservesSizeAndConstantImages) {
  Rng rng(2);
  const Image flat = solid(20, 30, 0.3f, 0.6f, 0.9f);
  for (int label = 0; label <= 1; ++label) {
    for (int i = 0; i < 20; ++i) {
      const Image out = augment_one(flat, label, rng);
      ASSERT_TRUE(out.same_shape(flat));
      for (std::size_t k = 0; k < out.size(); ++k) {
        EXPECT_NEAR(out.data()[k], flat.data()[k], 1e-6);
      }
    }
  }
}

TEST(Augment, BusyPatchesAreNeverFlippedVertically) {
  // A vertical ramp keeps its direction under h-flip and crop; only a
  // v-flip reverses it.
  Image ramp(20, 20, 3);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = y / 19.0f;
    }
  }
  Rng rng(8);
  int reversed_free = 0;
  for (int i = 0; i < 50; ++i) {
    const Image busy = augment_one(ramp, 1, rng);
    EXPECT_LT(busy.at(0, 10, 0), busy.at(19, 10, 0));
    const Image free = augment_one(ramp, 0, rng);
    reversed_free += free.at(0, 10, 0) > free.at(19, 10, 0);
  }
  EXPECT_GT(reversed_free, 10);
  EXPECT_LT(reversed_free, 40);
}

// ---- toy corpus ----

TEST(ToyCorpus, SplitsEachClassSeventyThirty) {
  ScratchDir dir("toy");
  const ToyCorpus toy = make_toy_corpus(20, 1, dir.path(), 16);
  EXPECT_EQ(toy.train.count_label(0), 14u);
  EXPECT_EQ(toy.train.count_label(1), 14u);
  EXPECT_EQ(toy.test.count_label(0), 6u);
  EXPECT_EQ(toy.test.count_label(1), 6u);
  std::set<std::string> train_paths;
  for (const auto& r : toy.train.records) train_paths.insert(r.path);
  for (const auto& r : toy.test.records) EXPECT_FALSE(train_paths.count(r.path)) << r.path;
  for (const auto& r : toy.train.records) {
    EXPECT_TRUE(r.has_tag("clear"));
    ASSERT_TRUE(r.tag_value("depth").has_value());
    EXPECT_NO_THROW(depth_from_spec(*r.tag_value("depth"), 16, 16));
    const Image img = toy.train.load_image(r);
    EXPECT_EQ(img.height(), 16);
    EXPECT_EQ(img.channels(), 3);
  }
  EXPECT_EQ(read_manifest(dir / "train.csv").size(), 28u);
  EXPECT_EQ(read_manifest(dir / "test.csv").size(), 12u);
}

TEST(ToyCorpus, RerunIsByteIdentical) {
  ScratchDir a("toy_a");
  ScratchDir b("toy_b");
  const ToyCorpus ta = make_toy_corpus(10, 42, a.path());
  make_toy_corpus(10, 42, b.path());
  EXPECT_EQ(slurp(a / "train.csv"), slurp(b / "train.csv"));
  EXPECT_EQ(slurp(a / "test.csv"), slurp(b / "test.csv"));
  for (const auto& r : ta.train.records) EXPECT_EQ(slurp(a / r.path), slurp(b / r.path));
}

TEST(ToyCorpus, RejectsTooFewSamples) {
  ScratchDir dir("toy");
  EXPECT_THROW(make_toy_corpus(9, 1, dir.path()), ConfigError);
  EXPECT_THROW(make_toy_corpus(10, 1, dir.path(), 8), ConfigError);
}

TEST(ToyCorpus, ClassesDifferInBrightness) {
  // Busy patches carry a dark car body, so their darkest decile is darker.
  Rng rng(6);
  auto dark = [](const Image& img) {
    std::vector<float> v(img.data().begin(), img.data().end());
    std::nth_element(v.begin(), v.begin() + v.size() / 10, v.end());
    return v[v.size() / 10];
  };
  double busy = 0, free = 0;
  for (int i = 0; i < 30; ++i) {
    busy += dark(render_toy_patch(1, 32, rng));
    free += dark(render_toy_patch(0, 32, rng));
  }
  EXPECT_LT(busy, free);
}

TEST(Streams, IndependentAndReproducible) {
  Rng a = make_stream(1, 0), b = make_stream(1, 0), c = make_stream(1, 1), d = make_stream(2, 0);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

}  // namespace
}  // namespace hazepark
