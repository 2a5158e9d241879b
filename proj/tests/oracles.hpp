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

// Naive scalar-loop reference implementations. These deliberately avoid the
// library's helpers (no resize_bilinear_plane, no BoxRegion::contains, no
// SemanticPercentMap::mass) so that agreement is evidence, not tautology.

#include <cmath>
#include <random>
#include <vector>

#include "snapmix/cam.hpp"
#include "snapmix/datagen.hpp"
#include "snapmix/image.hpp"
#include "snapmix/model.hpp"

namespace oracle {

using snapmix::BoxRegion;
using snapmix::Image;
using snapmix::Map2D;

inline bool inside(const BoxRegion& b, int y, int x) {
  return b.x0 <= x && x < b.x1 && b.y0 <= y && y < b.y1;
}

inline Image mixup(const Image& a, const Image& b, double lam) {
  Image out(a.channels(), a.height(), a.width());
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        out.at(c, y, x) = lam * a.at(c, y, x) + (1 - lam) * b.at(c, y, x);
  return out;
}

inline Image cutmix(const Image& a, const Image& b, const BoxRegion& box) {
  Image out(a.channels(), a.height(), a.width());
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        out.at(c, y, x) = inside(box, y, x) ? b.at(c, y, x) : a.at(c, y, x);
  return out;
}

/// Fraction of pixels of `mixed` that came from `b` (pixel-membership count).
inline double pasted_fraction(const BoxRegion& box, int w, int h) {
  long n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) n += inside(box, y, x) ? 1 : 0;
  return double(n) / double(w * h);
}

inline Image cutout(const Image& a, const BoxRegion& box, double fill) {
  Image out = a;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        if (inside(box, y, x)) out.at(c, y, x) = fill;
  return out;
}

/// Align-corners bilinear sample of a [h, w] grid `g` at real coords.
inline double sample(const std::vector<double>& g, int h, int w, double sy,
                     double sx) {
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
  const int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
  const double wy = sy - y0, wx = sx - x0;
  auto at = [&](int y, int x) { return g[y * w + x]; };
  return at(y0, x0) * (1 - wy) * (1 - wx) + at(y0, x1) * (1 - wy) * wx +
         at(y1, x0) * wy * (1 - wx) + at(y1, x1) * wy * wx;
}

inline std::vector<double> resize(const std::vector<double>& g, int h, int w,
                                  int out_h, int out_w) {
  std::vector<double> out(out_h * out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double sy = out_h == 1 ? 0.0 : y * double(h - 1) / double(out_h - 1);
      const double sx = out_w == 1 ? 0.0 : x * double(w - 1) / double(out_w - 1);
      out[y * out_w + x] = sample(g, h, w, sy, sx);
    }
  return out;
}

inline Image transform_patch(const Image& src, const BoxRegion& box, int dst_w,
                             int dst_h) {
  Image out(src.channels(), dst_h, dst_w);
  const int h = box.y1 - box.y0, w = box.x1 - box.x0;
  for (int c = 0; c < src.channels(); ++c) {
    std::vector<double> crop(h * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) crop[y * w + x] = src.at(c, box.y0 + y, box.x0 + x);
    const auto r = resize(crop, h, w, dst_h, dst_w);
    for (int y = 0; y < dst_h; ++y)
      for (int x = 0; x < dst_w; ++x) out.at(c, y, x) = r[y * dst_w + x];
  }
  return out;
}

inline Image snapmix_image(const Image& a, const BoxRegion& box_a, const Image& b,
                           const BoxRegion& box_b) {
  if (box_a.x0 == box_a.x1 || box_a.y0 == box_a.y1 || box_b.x0 == box_b.x1 ||
      box_b.y0 == box_b.y1)
    return a;
  const Image patch =
      oracle::transform_patch(b, box_b, box_a.x1 - box_a.x0, box_a.y1 - box_a.y0);
  Image out = a;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        if (inside(box_a, y, x))
          out.at(c, y, x) = patch.at(c, y - box_a.y0, x - box_a.x0);
  return out;
}

/// Sum of map entries over the box, by scanning every pixel.
inline double box_sum(const Map2D& m, const BoxRegion& box) {
  double s = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (inside(box, y, x)) s += m.values[y * m.width + x];
  return s;
}

inline Map2D cam(const snapmix::ActivationStack& st,
                 const std::vector<double>& w, int out_h, int out_w) {
  std::vector<double> low(st.height * st.width, 0.0);
  for (int y = 0; y < st.height; ++y)
    for (int x = 0; x < st.width; ++x)
      for (int l = 0; l < st.depth; ++l) low[y * st.width + x] += w[l] * st.at(l, y, x);
  Map2D out(out_h, out_w);
  out.values = resize(low, st.height, st.width, out_h, out_w);
  for (double& v : out.values)
    if (v < 0) v = 0;
  return out;
}

inline double true_ratio(const snapmix::BinaryMask& m, const BoxRegion& box) {
  long total = 0, in = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.bits[y * m.width + x]) continue;
      ++total;
      if (inside(box, y, x)) ++in;
    }
  return total ? double(in) / double(total) : 0.0;
}

inline Image random_image(std::mt19937_64& rng, int c, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(c, h, w);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

inline BoxRegion random_box(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> ux(0, w), uy(0, h);
  int x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  return BoxRegion::make(x0, y0, x1, y1, w, h);
}

inline BoxRegion random_nonempty_box(std::mt19937_64& rng, int w, int h) {
  for (;;) {
    BoxRegion b = random_box(rng, w, h);
    if (!b.is_empty()) return b;
  }
}

}  // namespace oracle
