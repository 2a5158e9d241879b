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

#include <algorithm>
#include <stdexcept>

#include "snapmix/image.hpp"

namespace snapmix {

/// Totals below this are treated as an all-zero activation map.
inline constexpr double kSpmEpsilon = 1e-12;

/// Per-pixel share of an image's label evidence: nonnegative, sums to one.
///
/// `uniform` marks maps known to be exactly 1/(H*W) everywhere (degenerate
/// fallback or constant input). Mass over a box of a uniform map is then the
/// box's area ratio, computed in closed form instead of by summation.
struct SemanticPercentMap {
  Map2D map;
  bool uniform = false;

  int height() const { return map.height; }
  int width() const { return map.width; }
  double at(int y, int x) const { return map.at(y, x); }

  static SemanticPercentMap make_uniform(int height, int width) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("SemanticPercentMap: empty extent");
    }
    SemanticPercentMap s;
    s.map = Map2D(height, width,
                  1.0 / (static_cast<double>(height) * width));
    s.uniform = true;
    return s;
  }

  /// Sum of the map over a box of matching dimensions.
  double mass(const BoxRegion& box) const {
    if (!box.fits(width(), height())) {
      throw std::invalid_argument("SemanticPercentMap: box dims mismatch");
    }
    if (box.is_empty()) return 0.0;
    if (uniform) return box.realized_ratio;
    double s = 0.0;
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) s += map.at(y, x);
    return s;
  }

  friend bool operator==(const SemanticPercentMap&,
                         const SemanticPercentMap&) = default;
};

/// Normalizes a nonnegative CAM to sum to one. All-zero (below
/// kSpmEpsilon) and constant maps yield the exact uniform map.
inline SemanticPercentMap make_spm(const Map2D& cam) {
  if (cam.height < 1 || cam.width < 1) {
    throw std::invalid_argument("make_spm: empty map");
  }
  double total = 0.0;
  for (double v : cam.values) {
    if (v < 0.0) {
      throw std::invalid_argument("make_spm: negative CAM entry");
    }
    total += v;
  }
  const bool constant =
      std::all_of(cam.values.begin(), cam.values.end(),
                  [&](double v) { return v == cam.values.front(); });
  if (total < kSpmEpsilon || constant) {
    return SemanticPercentMap::make_uniform(cam.height, cam.width);
  }
  SemanticPercentMap s;
  s.map = cam;
  for (double& v : s.map.values) v /= total;
  return s;
}

}  // namespace snapmix
