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

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace snapmix {

/// Dense [channels, height, width] raster in row-major order. Values are
/// expected in [0, 1] after ingestion but the type itself only enforces
/// finiteness through `validate()`.
class Image {
 public:
  Image() = default;

  Image(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    if (channels != 1 && channels != 3) {
      throw std::invalid_argument("Image: channels must be 1 or 3, got " +
                                  std::to_string(channels));
    }
    if (height < 1 || width < 1) {
      throw std::invalid_argument("Image: height and width must be >= 1");
    }
    pixels_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  Image(int channels, int height, int width, std::vector<double> pixels)
      : Image(channels, height, width) {
    if (pixels.size() != pixels_.size()) {
      throw std::invalid_argument("Image: pixel buffer size mismatch");
    }
    pixels_ = std::move(pixels);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(int c, int y, int x) {
    return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return pixels_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> plane(int c) {
    return {pixels_.data() + c * plane_size(), plane_size()};
  }
  std::span<const double> plane(int c) const {
    return {pixels_.data() + c * plane_size(), plane_size()};
  }

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  bool same_shape(const Image& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  void validate() const {
    for (double v : pixels_) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("Image: non-finite pixel value");
      }
    }
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// Single-channel [height, width] real map (CAMs, SPMs, masks).
struct Map2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Map2D() = default;
  Map2D(int h, int w, double fill = 0.0)
      : height(h), width(w),
        values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }

  friend bool operator==(const Map2D&, const Map2D&) = default;
};

/// Axis-aligned half-open pixel rectangle [x0, x1) x [y0, y1) together with
/// the image dimensions it was cut from.
struct BoxRegion {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int image_width = 0;
  int image_height = 0;
  double realized_ratio = 0.0;

  static BoxRegion make(int x0, int y0, int x1, int y1, int image_width,
                        int image_height) {
    if (image_width < 1 || image_height < 1) {
      throw std::invalid_argument("BoxRegion: image dims must be >= 1");
    }
    if (x0 < 0 || y0 < 0 || x1 < x0 || y1 < y0 || x1 > image_width ||
        y1 > image_height) {
      throw std::invalid_argument(
          "BoxRegion: (" + std::to_string(x0) + "," + std::to_string(y0) +
          ")-(" + std::to_string(x1) + "," + std::to_string(y1) +
          ") out of bounds for " + std::to_string(image_width) + "x" +
          std::to_string(image_height));
    }
    BoxRegion b{x0, y0, x1, y1, image_width, image_height, 0.0};
    b.realized_ratio = static_cast<double>(b.area()) /
                       (static_cast<double>(image_width) * image_height);
    return b;
  }

  static BoxRegion empty_box(int image_width, int image_height) {
    return make(0, 0, 0, 0, image_width, image_height);
  }
  static BoxRegion full(int image_width, int image_height) {
    return make(0, 0, image_width, image_height, image_width, image_height);
  }

  int box_width() const { return x1 - x0; }
  int box_height() const { return y1 - y0; }
  long area() const { return static_cast<long>(box_width()) * box_height(); }
  bool is_empty() const { return x0 == x1 || y0 == y1; }
  bool contains(int y, int x) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  bool fits(int width, int height) const {
    return image_width == width && image_height == height;
  }

  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

}  // namespace snapmix
