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

#include <random>

#include "oracles.hpp"
#include "snapmix/preview.hpp"

namespace snapmix {
namespace {

SemanticPercentMap random_spm(std::mt19937_64& gen, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Map2D m(h, w, 0.0);
  for (double& v : m.values) v = u(gen) * u(gen);
  return make_spm(m);
}

struct Batch {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<SemanticPercentMap> spms;
};

Batch random_batch(std::mt19937_64& gen, int n, int size) {
  Batch b;
  for (int i = 0; i < n; ++i) {
    b.images.push_back(oracle::random_image(gen, 3, size, size));
    b.labels.push_back(i % 3);
    b.spms.push_back(random_spm(gen, size, size));
  }
  return b;
}

TEST(Preview, SidecarReproducesRhoForEveryStrategy) {
  std::mt19937_64 gen(7);
  const Batch b = random_batch(gen, 6, 12);
  const SpmProvider spms = [&](std::size_t i) -> const SemanticPercentMap& { return b.spms[i]; };
  struct Cell {
    MixStrategy s;
    bool sym;
    LabelStrategy l;
  };
  const std::vector<Cell> cells = {
      {MixStrategy::snapmix, false, LabelStrategy::semantic_ratio},
      {MixStrategy::snapmix, true, LabelStrategy::semantic_ratio},
      {MixStrategy::snapmix, false, LabelStrategy::area_ratio},
      {MixStrategy::cutmix, true, LabelStrategy::area_ratio},
      {MixStrategy::cutout, true, LabelStrategy::area_ratio},
      {MixStrategy::mixup, true, LabelStrategy::area_ratio},
  };
  int checked = 0;
  for (const Cell& c : cells) {
    MixConfig cfg;
    cfg.strategy = c.s;
    cfg.symmetric = c.sym;
    cfg.label_strategy = c.l;
    cfg.alpha = 2.0;
    cfg.switch_prob = 1.0;
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const auto mixed = apply_mix(b.images, b.labels, spms, cfg, rng);
      for (std::size_t i = 0; i < mixed.size(); ++i) {
        const MixResult& m = mixed[i];
        const int p = m.partner < 0 ? static_cast<int>(i) : m.partner;
        const PreviewPanel panel =
            render_preview(b.images[i], b.images[p], m, cfg, b.spms[i], b.spms[p]);
        // Parse the serialized text, as a reader of the file would.
        const auto j = nlohmann::json::parse(panel.sidecar.dump());
        EXPECT_EQ(j.at("rho_a").get<double>(), m.rho_a);
        EXPECT_EQ(j.at("rho_b").get<double>(), m.rho_b);
        EXPECT_EQ(j.at("label_a").get<int>(), m.label_a);
        EXPECT_EQ(j.at("label_b").get<int>(), m.label_b);
        const auto rho = recompute_rho(j);
        if (c.s == MixStrategy::mixup && m.mixed) {
          EXPECT_FALSE(rho.has_value());
          EXPECT_NEAR(m.rho_a + m.rho_b, 1.0, 1e-12);
          continue;
        }
        ASSERT_TRUE(rho.has_value());
        EXPECT_NEAR(rho->rho_a, m.rho_a, 1e-9);
        EXPECT_NEAR(rho->rho_b, m.rho_b, 1e-9);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(Preview, PanelLayout) {
  std::mt19937_64 gen(3);
  const Batch b = random_batch(gen, 2, 16);
  MixConfig cfg;
  cfg.strategy = MixStrategy::snapmix;
  cfg.switch_prob = 1.0;
  Rng rng(1);
  const SpmProvider spms = [&](std::size_t i) -> const SemanticPercentMap& { return b.spms[i]; };
  const auto mixed = apply_mix(b.images, b.labels, spms, cfg, rng);
  const PreviewPanel p =
      render_preview(b.images[0], b.images[1], mixed[0], cfg, b.spms[0], b.spms[1]);
  EXPECT_EQ(p.panel.channels(), 3);
  EXPECT_EQ(p.panel.height(), 128);
  EXPECT_EQ(p.panel.width(), 5 * 128 + 4 * 2);
  for (double v : p.panel.pixels()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const std::string name = panel_filename(4, mixed[0]);
  EXPECT_EQ(name.rfind("panel_004_snapmix_ra", 0), 0u);
}

TEST(Preview, JsonRoundTrips) {
  std::mt19937_64 gen(5);
  const SemanticPercentMap s = random_spm(gen, 5, 7);
  const auto back = spm_from_json(nlohmann::json::parse(spm_json(s).dump()));
  EXPECT_EQ(back.map.values, s.map.values);
  EXPECT_EQ(back.uniform, s.uniform);
  const BoxRegion box = BoxRegion::make(1, 2, 6, 5, 7, 9);
  const BoxRegion bb = box_from_json(nlohmann::json::parse(box_json(box).dump()));
  EXPECT_EQ(bb.x0, 1);
  EXPECT_EQ(bb.y1, 5);
  EXPECT_EQ(bb.image_height, 9);
  EXPECT_EQ(bb.realized_ratio, box.realized_ratio);
}

TEST(Preview, JetEndpoints) {
  const auto lo = jet(0.0), hi = jet(1.0), mid = jet(0.5);
  EXPECT_EQ(lo[0], 0.0);
  EXPECT_GT(lo[2], 0.0);
  EXPECT_GT(hi[0], 0.0);
  EXPECT_EQ(hi[2], 0.0);
  EXPECT_EQ(mid[1], 1.0);
}

}  // namespace
}  // namespace snapmix
