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
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace snapmix {

/// Bilinear resampling of one plane with the align-corners convention: the
/// centres of the four corner pixels of the source map exactly onto the
/// corner pixels of the destination, so a source coordinate is
///   src = dst * (src_len - 1) / (dst_len - 1)
/// and a destination of length 1 samples source index 0. Every resize in
/// the library (patch transform, CAM upsampling, ingestion) goes through
/// this routine.
///
/// `src` is addressed as src[(y0 + y) * stride + (x0 + x)] for the crop
/// window of size src_h x src_w; `dst` receives dst_h * dst_w values.
inline void resize_bilinear_plane(std::span<const double> src,
                                  std::size_t stride, int x0, int y0,
                                  int src_w, int src_h, std::span<double> dst,
                                  int dst_w, int dst_h) {
  if (src_w < 1 || src_h < 1 || dst_w < 1 || dst_h < 1) {
    throw std::invalid_argument("resize_bilinear_plane: empty extent");
  }
  if (dst.size() < static_cast<std::size_t>(dst_w) * dst_h) {
    throw std::invalid_argument("resize_bilinear_plane: dst too small");
  }
  auto px = [&](int y, int x) {
    return src[static_cast<std::size_t>(y0 + y) * stride + (x0 + x)];
  };

  if (src_w == dst_w && src_h == dst_h) {
    for (int y = 0; y < dst_h; ++y)
      for (int x = 0; x < dst_w; ++x)
        dst[static_cast<std::size_t>(y) * dst_w + x] = px(y, x);
    return;
  }

  const double sx = dst_w > 1 ? double(src_w - 1) / double(dst_w - 1) : 0.0;
  const double sy = dst_h > 1 ? double(src_h - 1) / double(dst_h - 1) : 0.0;

  // Horizontal taps are shared by every row.
  std::vector<int> xl(dst_w), xr(dst_w);
  std::vector<double> fx(dst_w);
  for (int x = 0; x < dst_w; ++x) {
    const double pos = x * sx;
    int l = std::min(static_cast<int>(pos), src_w - 1);
    xl[x] = l;
    xr[x] = std::min(l + 1, src_w - 1);
    fx[x] = pos - l;
  }

  for (int y = 0; y < dst_h; ++y) {
    const double pos = y * sy;
    const int t = std::min(static_cast<int>(pos), src_h - 1);
    const int b = std::min(t + 1, src_h - 1);
    const double fy = pos - t;
    for (int x = 0; x < dst_w; ++x) {
      const double top = px(t, xl[x]) * (1.0 - fx[x]) + px(t, xr[x]) * fx[x];
      const double bot = px(b, xl[x]) * (1.0 - fx[x]) + px(b, xr[x]) * fx[x];
      dst[static_cast<std::size_t>(y) * dst_w + x] =
          top * (1.0 - fy) + bot * fy;
    }
  }
}

}  // namespace snapmix
