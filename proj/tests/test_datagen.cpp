// Copyright (c) 2026 The snapmix-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "snapmix/datagen.hpp"
#include "snapmix/image_io.hpp"

namespace snapmix {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("snapmix_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 4;
  s.image_size = 16;
  s.cue_size = 3;
  s.samples_per_class = 10;
  s.seed = 5;
  return s;
}

TEST(Generate, DeterministicUnderSeed) {
  const SyntheticSpec s = small_spec();
  EXPECT_EQ(generate(s), generate(s));
  SyntheticSpec t = s;
  t.seed = 6;
  EXPECT_NE(generate(s).train.front().image, generate(t).train.front().image);
}

TEST(Generate, StratifiedEightyTwenty) {
  SyntheticSpec s = small_spec();
  for (int n : {2, 5, 10, 13, 60}) {
    s.samples_per_class = n;
    const Dataset ds = generate(s);
    std::map<int, int> train, test;
    for (const auto& x : ds.train) ++train[x.label];
    for (const auto& x : ds.test) ++test[x.label];
    for (int k = 0; k < s.num_classes; ++k) {
      EXPECT_LE(std::abs(test[k] - 0.2 * n), 1.0) << "n=" << n;
      EXPECT_LE(std::abs(train[k] - 0.8 * n), 1.0) << "n=" << n;
      EXPECT_EQ(train[k] + test[k], n);
    }
  }
}

TEST(Generate, MaskDensityAndLocalization) {
  SyntheticSpec s = small_spec();
  s.image_size = 32;
  s.cue_size = 8;
  s.samples_per_class = 5;
  const Dataset ds = generate(s);
  for (const auto* split : {&ds.train, &ds.test})
    for (const Sample& x : *split) {
      ASSERT_TRUE(x.semantic_mask);
      EXPECT_EQ(x.semantic_mask->count(), 64);
      EXPECT_DOUBLE_EQ(double(x.semantic_mask->count()) / 1024.0, 0.0625);
      EXPECT_EQ(true_semantic_ratio(x, BoxRegion::full(32, 32)), 1.0);
    }
}

TEST(Generate, NoiselessCueIdentifiesClass) {
  SyntheticSpec s = small_spec();
  s.num_classes = 2;
  s.noise_std = 0.0;
  const Dataset ds = generate(s);
  const auto patterns = make_cue_patterns(s);
  // Read the cue region through the mask and match it against each class
  // pattern; only the true class may match.
  for (const Sample& x : ds.test) {
    const BinaryMask& m = *x.semantic_mask;
    int y0 = m.height, x0 = m.width;
    for (int y = 0; y < m.height; ++y)
      for (int xx = 0; xx < m.width; ++xx)
        if (m.at(y, xx)) {
          y0 = std::min(y0, y);
          x0 = std::min(x0, xx);
        }
    int matches = 0, matched = -1;
    for (int k = 0; k < 2; ++k) {
      bool ok = true;
      for (int c = 0; c < s.channels && ok; ++c)
        for (int dy = 0; dy < s.cue_size && ok; ++dy)
          for (int dx = 0; dx < s.cue_size && ok; ++dx)
            ok = x.image.at(c, y0 + dy, x0 + dx) ==
                 patterns[k][(std::size_t(c) * s.cue_size + dy) * s.cue_size + dx];
      if (ok) {
        ++matches;
        matched = k;
      }
    }
    EXPECT_EQ(matches, 1);
    EXPECT_EQ(matched, x.label);
  }
}

TEST(Generate, UniquePatternsOrError) {
  SyntheticSpec s = small_spec();
  const auto p = make_cue_patterns(s);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) EXPECT_NE(p[i], p[j]);
  s.channels = 1;
  s.cue_size = 1;
  s.num_classes = 3;
  EXPECT_THROW(generate(s), std::invalid_argument);
}

TEST(Generate, SpecValidation) {
  SyntheticSpec s = small_spec();
  s.cue_size = s.image_size;
  EXPECT_THROW(generate(s), std::invalid_argument);
  s = small_spec();
  s.noise_std = -0.1;
  EXPECT_THROW(generate(s), std::invalid_argument);
}

TEST(Generate, PixelsInUnitInterval) {
  SyntheticSpec s = small_spec();
  s.noise_std = 0.5;
  for (const Sample& x : generate(s).train)
    for (double v : x.image.pixels()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
}

TEST(PaintCue, ClipsAtBorderAndMaskStaysTruthful) {
  Image img(1, 6, 6, 0.5);
  BinaryMask m(6, 6);
  const std::vector<double> pattern(9, 1.0);
  paint_cue(img, m, pattern, 3, 4, -1);
  EXPECT_EQ(m.count(), 4);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(m.at(y, x) == 1, img.at(0, y, x) == 1.0);
}

TEST(TrueSemanticRatio, Examples) {
  Sample s;
  s.image = Image(1, 8, 8);
  s.semantic_mask = BinaryMask(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) s.semantic_mask->at(y, x) = 1;
  EXPECT_EQ(true_semantic_ratio(s, BoxRegion::full(8, 8)), 1.0);
  EXPECT_EQ(true_semantic_ratio(s, BoxRegion::make(6, 0, 8, 8, 8, 8)), 0.0);
  EXPECT_EQ(true_semantic_ratio(s, BoxRegion::make(0, 0, 4, 8, 8, 8)), 0.5);
  Sample bare;
  bare.image = Image(1, 8, 8);
  EXPECT_THROW(true_semantic_ratio(bare, BoxRegion::full(8, 8)), std::invalid_argument);
}

TEST(TrueSemanticRatio, OracleAgreement) {
  const Dataset ds = generate(small_spec());
  std::mt19937_64 g(3);
  for (int t = 0; t < 100; ++t) {
    const Sample& x = ds.train[t % ds.train.size()];
    const BoxRegion b = oracle::random_box(g, 16, 16);
    EXPECT_NEAR(true_semantic_ratio(x, b), oracle::true_ratio(*x.semantic_mask, b), 1e-6);
  }
}

// ---------------------------------------------------------------- manifest

TEST(Manifest, GoldenFieldNames) {
  Manifest m;
  m.num_classes = 2;
  m.skipped = 1;
  ManifestRecord a;
  a.id = "train/0";
  a.split = "train";
  a.label = 0;
  a.class_name = "alpha";
  a.path = "alpha/img0.png";
  ManifestRecord b;
  b.id = "test/0";
  b.split = "test";
  b.label = 1;
  b.class_name = "beta";
  b.mask = "masks/test_0.png";
  m.records = {a, b};
  const std::string golden =
      R"({"type":"sample","id":"train/0","split":"train","label":0,"class":"alpha","path":"alpha/img0.png"})"
      "\n"
      R"({"type":"sample","id":"test/0","split":"test","label":1,"class":"beta","mask":"masks/test_0.png"})"
      "\n"
      R"({"type":"summary","num_classes":2,"samples":2,"skipped":1})"
      "\n";
  EXPECT_EQ(manifest_text(m), golden);
  std::istringstream in(golden);
  EXPECT_EQ(parse_manifest(in), m);
}

TEST(Manifest, ParseErrors) {
  std::istringstream no_summary(R"({"type":"sample","id":"a","split":"train","label":0,"class":"x"})");
  EXPECT_THROW(parse_manifest(no_summary), std::invalid_argument);
  std::istringstream garbage("{not json\n");
  EXPECT_THROW(parse_manifest(garbage), std::invalid_argument);
}

// ---------------------------------------------------------------- ingestion

void write_png(const fs::path& p, int w, int h, double v) {
  fs::create_directories(p.parent_path());
  save_png(p, Image(3, h, w, v));
}

TEST(Ingest, TwoClassesThreeImagesEach) {
  TempDir dir("ingest");
  for (const char* cls : {"b_class", "a_class"})
    for (int i = 0; i < 3; ++i)
      write_png(dir.path() / cls / ("img" + std::to_string(i) + ".png"), 20, 12, 0.2 * i);
  std::ofstream(dir.path() / "a_class" / "broken.png") << "not an image";
  int warnings = 0;
  IngestOptions opt;
  opt.resize = 16;
  opt.crop = 8;
  const Dataset ds = ingest_folder(dir.path(), opt, [&](const std::string&) { ++warnings; });
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"a_class", "b_class"}));
  EXPECT_EQ(ds.train.size() + ds.test.size(), 6u);
  EXPECT_EQ(ds.skipped, 1);
  EXPECT_EQ(warnings, 1);
  for (const auto* split : {&ds.train, &ds.test})
    for (const Sample& s : *split) {
      EXPECT_EQ(s.image.height(), 16);
      EXPECT_EQ(s.image.width(), 16);
      EXPECT_EQ(s.label, s.source.find("a_class") != std::string::npos ? 0 : 1);
    }
  const Manifest m = manifest_of(ds);
  EXPECT_EQ(m.records.size(), 6u);
  EXPECT_EQ(m.skipped, 1);
}

TEST(Ingest, PresplitFoldersAndEmptyClass) {
  TempDir dir("presplit");
  write_png(dir.path() / "train" / "x" / "0.png", 8, 8, 0.1);
  write_png(dir.path() / "test" / "x" / "0.png", 8, 8, 0.9);
  IngestOptions opt;
  opt.resize = 8;
  opt.crop = 8;
  const Dataset ds = ingest_folder(dir.path(), opt);
  EXPECT_EQ(ds.train.size(), 1u);
  EXPECT_EQ(ds.test.size(), 1u);

  fs::create_directories(dir.path() / "train" / "y");
  EXPECT_THROW(ingest_folder(dir.path(), opt), std::invalid_argument);
}

TEST(Ingest, ResizeAndCropGeometry) {
  TempDir dir("geom");
  write_png(dir.path() / "wide.png", 600, 400, 0.5);
  const auto img = load_image(dir.path() / "wide.png");
  ASSERT_TRUE(img);
  const Image r = resize_image(*img, 512, 512);
  EXPECT_EQ(r.width(), 512);
  EXPECT_EQ(r.height(), 512);

  std::mt19937_64 g(1);
  const Image sq = oracle::random_image(g, 3, 448, 448);
  EXPECT_EQ(center_crop(sq, 448), sq);
  Rng rng(1);
  EXPECT_EQ(random_crop(sq, 448, rng), sq);
  EXPECT_FALSE(load_image(dir.path() / "missing.png").has_value());
}

TEST(Ingest, PngRoundTripIsLossless) {
  TempDir dir("png");
  Image img(3, 5, 7);
  std::mt19937_64 g(2);
  std::uniform_int_distribution<int> u(0, 255);
  for (double& v : img.pixels()) v = u(g) / 255.0;
  save_png(dir.path() / "x.png", img);
  const auto back = load_image(dir.path() / "x.png");
  ASSERT_TRUE(back);
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_NEAR(back->pixels()[i], img.pixels()[i], 1e-12);
}

}  // namespace
}  // namespace snapmix
