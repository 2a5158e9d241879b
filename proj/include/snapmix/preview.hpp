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

#pragma once

// Augmentation preview panels and their JSON sidecars.
//
// Heat overlays use the piecewise-linear "jet" colormap
//   r = clamp(1.5 - |4t - 3|), g = clamp(1.5 - |4t - 2|), b = clamp(1.5 - |4t - 1|)
// on the map normalized by its maximum, alpha-blended at 0.5 over the
// greyscale image. Panels are PNG.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapmix/cam.hpp"
#include "snapmix/image.hpp"
#include "snapmix/mix.hpp"
#include "snapmix/spm.hpp"

namespace snapmix {

inline constexpr double kOverlayAlpha = 0.5;

inline std::array<double, 3> jet(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto ch = [t](double c) { return std::clamp(1.5 - std::abs(4.0 * t - c), 0.0, 1.0); };
  return {ch(3.0), ch(2.0), ch(1.0)};
}

inline Image to_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(3, img.height(), img.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = img.at(0, y, x);
  return out;
}

inline Image heat_overlay(const Image& img, const Map2D& heat) {
  Image out(3, img.height(), img.width());
  double peak = 0.0;
  for (double v : heat.values) peak = std::max(peak, v);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double grey = 0.0;
      for (int c = 0; c < img.channels(); ++c) grey += img.at(c, y, x);
      grey /= img.channels();
      const auto rgb = jet(peak > 0.0 ? heat.at(y, x) / peak : 0.0);
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = (1.0 - kOverlayAlpha) * grey + kOverlayAlpha * rgb[c];
    }
  return out;
}

inline void draw_box(Image& rgb, const BoxRegion& box, std::array<double, 3> color) {
  if (box.is_empty()) return;
  auto put = [&](int y, int x) {
    for (int c = 0; c < 3; ++c) rgb.at(c, y, x) = color[c];
  };
  for (int x = box.x0; x < box.x1; ++x) {
    put(box.y0, x);
    put(box.y1 - 1, x);
  }
  for (int y = box.y0; y < box.y1; ++y) {
    put(y, box.x0);
    put(y, box.x1 - 1);
  }
}

inline Image upscale_nearest(const Image& img, int factor) {
  if (factor <= 1) return img;
  Image out(img.channels(), img.height() * factor, img.width() * factor);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        out.at(c, y, x) = img.at(c, y / factor, x / factor);
  return out;
}

/// Tiles RGB images of equal height left to right with 2px white gutters.
inline Image hconcat(const std::vector<Image>& tiles) {
  const int gutter = 2;
  int w = 0;
  for (const auto& t : tiles) w += t.width();
  w += gutter * (static_cast<int>(tiles.size()) - 1);
  Image out(3, tiles.front().height(), w, 1.0);
  int x0 = 0;
  for (const auto& t : tiles) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) out.at(c, y, x0 + x) = t.at(c, y, x);
    x0 += t.width() + gutter;
  }
  return out;
}

struct PreviewPanel {
  Image panel;
  nlohmann::ordered_json sidecar;
};

inline nlohmann::ordered_json box_json(const BoxRegion& b) {
  return {{"x0", b.x0},
          {"y0", b.y0},
          {"x1", b.x1},
          {"y1", b.y1},
          {"image_width", b.image_width},
          {"image_height", b.image_height},
          {"realized_ratio", b.realized_ratio}};
}

inline BoxRegion box_from_json(const nlohmann::json& j) {
  return BoxRegion::make(j.at("x0"), j.at("y0"), j.at("x1"), j.at("y1"),
                         j.at("image_width"), j.at("image_height"));
}

inline nlohmann::ordered_json spm_json(const SemanticPercentMap& s) {
  return {{"height", s.height()},
          {"width", s.width()},
          {"uniform", s.uniform},
          {"values", s.map.values}};
}

inline SemanticPercentMap spm_from_json(const nlohmann::json& j) {
  SemanticPercentMap s;
  s.map.height = j.at("height");
  s.map.width = j.at("width");
  s.map.values = j.at("values").get<std::vector<double>>();
  s.uniform = j.at("uniform");
  return s;
}

/// Builds the panel (source a + box_a, source b + box_b, mixed image, SPM
/// overlays of a and b) and the sidecar recording labels, boxes, rho and
/// both SPMs at full precision.
inline PreviewPanel render_preview(const Image& img_a, const Image& img_b,
                                   const MixResult& mix, const MixConfig& config,
                                   const SemanticPercentMap& spm_a,
                                   const SemanticPercentMap& spm_b) {
  const std::array<double, 3> red{1.0, 0.1, 0.1}, green{0.1, 1.0, 0.1};
  Image ta = to_rgb(img_a), tb = to_rgb(img_b);
  if (mix.box_a) draw_box(ta, *mix.box_a, red);
  if (mix.box_b && mix.strategy != MixStrategy::cutout) draw_box(tb, *mix.box_b, green);
  const int factor = std::max(1, 128 / std::max(1, img_a.height()));
  std::vector<Image> tiles = {ta, tb, to_rgb(mix.image), heat_overlay(img_a, spm_a.map),
                              heat_overlay(img_b, spm_b.map)};
  for (auto& t : tiles) t = upscale_nearest(t, factor);

  PreviewPanel p;
  p.panel = hconcat(tiles);
  auto& j = p.sidecar;
  j["strategy"] = std::string(to_string(mix.strategy));
  j["label_strategy"] = std::string(to_string(config.label_strategy));
  j["symmetric"] = config.symmetric;
  j["mixed"] = mix.mixed;
  j["label_a"] = mix.label_a;
  j["label_b"] = mix.label_b;
  j["rho_a"] = mix.rho_a;
  j["rho_b"] = mix.rho_b;
  j["box_a"] = mix.box_a ? box_json(*mix.box_a) : nlohmann::ordered_json(nullptr);
  j["box_b"] = mix.box_b ? box_json(*mix.box_b) : nlohmann::ordered_json(nullptr);
  j["spm_a"] = spm_json(spm_a);
  j["spm_b"] = spm_json(spm_b);
  return p;
}

/// Recomputes (rho_a, rho_b) from a sidecar's stored boxes and SPMs using
/// the same label rules as training. Mixup sidecars carry no boxes and
/// return nullopt.
inline std::optional<LabelWeights> recompute_rho(const nlohmann::json& sidecar) {
  const std::string strategy = sidecar.at("strategy");
  if (!sidecar.at("mixed").get<bool>()) return LabelWeights{1.0, 0.0};
  if (strategy == "mixup" || sidecar.at("box_a").is_null()) return std::nullopt;
  const BoxRegion box_a = box_from_json(sidecar.at("box_a"));
  if (strategy == "cutout") return LabelWeights{1.0, 0.0};
  if (strategy == "cutmix") return area_ratio_labels(box_a);
  const BoxRegion box_b = box_from_json(sidecar.at("box_b"));
  if (box_a.is_empty() || box_b.is_empty()) return LabelWeights{1.0, 0.0};
  if (sidecar.at("label_strategy") == "area_ratio") return area_ratio_labels(box_a);
  return semantic_ratio_labels(spm_from_json(sidecar.at("spm_a")), box_a,
                               spm_from_json(sidecar.at("spm_b")), box_b);
}

inline std::string panel_filename(int index, const MixResult& mix) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "panel_%03d_%s_ra%.6f_rb%.6f", index,
                std::string(to_string(mix.strategy)).c_str(), mix.rho_a, mix.rho_b);
  return buf;
}

}  // namespace snapmix
