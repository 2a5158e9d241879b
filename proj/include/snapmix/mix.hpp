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
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snapmix/image.hpp"
#include "snapmix/random.hpp"
#include "snapmix/resize.hpp"
#include "snapmix/spm.hpp"

namespace snapmix {

enum class MixStrategy { none, mixup, cutmix, cutout, snapmix };
enum class LabelStrategy { area_ratio, semantic_ratio };

inline std::string_view to_string(MixStrategy s) {
  switch (s) {
    case MixStrategy::none: return "none";
    case MixStrategy::mixup: return "mixup";
    case MixStrategy::cutmix: return "cutmix";
    case MixStrategy::cutout: return "cutout";
    case MixStrategy::snapmix: return "snapmix";
  }
  return "?";
}

inline std::string_view to_string(LabelStrategy s) {
  return s == LabelStrategy::area_ratio ? "area_ratio" : "semantic_ratio";
}

inline MixStrategy parse_mix_strategy(std::string_view s) {
  if (s == "none") return MixStrategy::none;
  if (s == "mixup") return MixStrategy::mixup;
  if (s == "cutmix") return MixStrategy::cutmix;
  if (s == "cutout") return MixStrategy::cutout;
  if (s == "snapmix") return MixStrategy::snapmix;
  throw std::invalid_argument("unknown mix strategy '" + std::string(s) + "'");
}

inline LabelStrategy parse_label_strategy(std::string_view s) {
  if (s == "area_ratio") return LabelStrategy::area_ratio;
  if (s == "semantic_ratio") return LabelStrategy::semantic_ratio;
  throw std::invalid_argument("unknown label strategy '" + std::string(s) +
                              "'");
}

struct MixConfig {
  double alpha = 1.0;
  double switch_prob = 0.5;
  MixStrategy strategy = MixStrategy::none;
  /// Only consulted by snapmix; cutmix always uses area-ratio labels.
  LabelStrategy label_strategy = LabelStrategy::semantic_ratio;
  /// snapmix only: reuse box_a as the source box (CutMix geometry).
  bool symmetric = false;

  void validate() const {
    if (!(alpha > 0.0)) {
      throw std::invalid_argument("MixConfig: alpha must be > 0");
    }
    if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) {
      throw std::invalid_argument("MixConfig: switch_prob must be in [0,1]");
    }
  }
};

struct MixResult {
  Image image;
  int label_a = 0;
  int label_b = 0;
  double rho_a = 1.0;
  double rho_b = 0.0;
  MixStrategy strategy = MixStrategy::none;
  bool mixed = false;
  std::optional<BoxRegion> box_a;
  std::optional<BoxRegion> box_b;
  /// Index of the partner within the batch, -1 for clean samples.
  int partner = -1;
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

namespace detail {

inline void require_same_shape(const Image& a, const Image& b,
                               const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": image shape mismatch");
  }
}

inline void require_box_fits(const BoxRegion& box, const Image& img,
                             const char* op) {
  if (!box.fits(img.width(), img.height())) {
    throw std::invalid_argument(std::string(op) +
                                ": box does not match image dims");
  }
}

/// One axis of the box sampler: a side of `len` pixels centred at `c`,
/// clipped to [0, dim). A side covering the full dimension spans it.
inline std::pair<int, int> place_span(int len, int c, int dim) {
  if (len <= 0) return {0, 0};
  if (len >= dim) return {0, dim};
  const int lo = std::clamp(c - len / 2, 0, dim);
  const int hi = std::clamp(c - len / 2 + len, 0, dim);
  return {lo, hi};
}

}  // namespace detail

/// Box with target sides (cut_w, cut_h) centred at (cx, cy), clipped.
inline BoxRegion place_box(int cut_w, int cut_h, int cx, int cy, int width,
                           int height) {
  auto [x0, x1] = detail::place_span(cut_w, cx, width);
  auto [y0, y1] = detail::place_span(cut_h, cy, height);
  if (x0 == x1 || y0 == y1) return BoxRegion::empty_box(width, height);
  return BoxRegion::make(x0, y0, x1, y1, width, height);
}

/// CutMix box sampler: sides scale with sqrt(lambda), centre uniform over
/// the image, clipped to bounds. realized_ratio reflects the clipped box.
inline BoxRegion sample_box(double lambda, int width, int height, Rng& rng) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("sample_box: lambda must be in [0,1]");
  }
  const double side = std::sqrt(lambda);
  const int cut_w = static_cast<int>(std::lround(width * side));
  const int cut_h = static_cast<int>(std::lround(height * side));
  const int cx = uniform_index(rng, width);
  const int cy = uniform_index(rng, height);
  return place_box(cut_w, cut_h, cx, cy, width, height);
}

inline MixResult mixup(const Image& img_a, const Image& img_b, double lambda) {
  detail::require_same_shape(img_a, img_b, "mixup");
  MixResult r;
  r.image = img_a;
  auto& out = r.image.pixels();
  const auto& pb = img_b.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lambda * out[i] + (1.0 - lambda) * pb[i];
  }
  r.rho_a = lambda;
  r.rho_b = 1.0 - lambda;
  r.strategy = MixStrategy::mixup;
  r.mixed = true;
  return r;
}

inline MixResult cutmix(const Image& img_a, const Image& img_b,
                        const BoxRegion& box) {
  detail::require_same_shape(img_a, img_b, "cutmix");
  detail::require_box_fits(box, img_a, "cutmix");
  MixResult r;
  r.image = img_a;
  for (int c = 0; c < img_a.channels(); ++c)
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        r.image.at(c, y, x) = img_b.at(c, y, x);
  r.rho_a = 1.0 - box.realized_ratio;
  r.rho_b = box.realized_ratio;
  r.strategy = MixStrategy::cutmix;
  r.mixed = true;
  r.box_a = box;
  r.box_b = box;
  return r;
}

inline MixResult cutout(const Image& img, const BoxRegion& box,
                        double fill = 0.0) {
  detail::require_box_fits(box, img, "cutout");
  MixResult r;
  r.image = img;
  for (int c = 0; c < img.channels(); ++c)
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) r.image.at(c, y, x) = fill;
  r.rho_a = 1.0;
  r.rho_b = 0.0;
  r.strategy = MixStrategy::cutout;
  r.mixed = true;
  r.box_a = box;
  return r;
}

/// Crop `src_box` out of `src` and bilinearly resize it (align-corners) to
/// dst_h x dst_w. Returns an image of shape [channels, dst_h, dst_w].
inline Image transform_patch(const Image& src, const BoxRegion& src_box,
                             int dst_w, int dst_h) {
  detail::require_box_fits(src_box, src, "transform_patch");
  if (src_box.is_empty()) {
    throw std::invalid_argument("transform_patch: empty source box");
  }
  if (dst_w < 1 || dst_h < 1) {
    throw std::invalid_argument("transform_patch: destination must be >= 1");
  }
  Image patch(src.channels(), dst_h, dst_w);
  for (int c = 0; c < src.channels(); ++c) {
    resize_bilinear_plane(src.plane(c), static_cast<std::size_t>(src.width()),
                          src_box.x0, src_box.y0, src_box.box_width(),
                          src_box.box_height(), patch.plane(c), dst_w, dst_h);
  }
  return patch;
}

/// img_a with the region box_a replaced by box_b of img_b resized to fit.
/// Either box empty leaves img_a untouched.
inline Image snapmix_image(const Image& img_a, const BoxRegion& box_a,
                           const Image& img_b, const BoxRegion& box_b) {
  detail::require_same_shape(img_a, img_b, "snapmix_image");
  detail::require_box_fits(box_a, img_a, "snapmix_image");
  detail::require_box_fits(box_b, img_b, "snapmix_image");
  Image out = img_a;
  if (box_a.is_empty() || box_b.is_empty()) return out;
  const Image patch =
      transform_patch(img_b, box_b, box_a.box_width(), box_a.box_height());
  for (int c = 0; c < out.channels(); ++c)
    for (int y = 0; y < box_a.box_height(); ++y)
      for (int x = 0; x < box_a.box_width(); ++x)
        out.at(c, box_a.y0 + y, box_a.x0 + x) = patch.at(c, y, x);
  return out;
}

struct LabelWeights {
  double rho_a = 1.0;
  double rho_b = 0.0;
};

inline LabelWeights area_ratio_labels(const BoxRegion& box_a) {
  return {1.0 - box_a.realized_ratio, box_a.realized_ratio};
}

inline LabelWeights semantic_ratio_labels(const SemanticPercentMap& spm_a,
                                          const BoxRegion& box_a,
                                          const SemanticPercentMap& spm_b,
                                          const BoxRegion& box_b) {
  return {clamp01(1.0 - spm_a.mass(box_a)), clamp01(spm_b.mass(box_b))};
}

/// Full snapmix composition for one pair. Degenerate boxes short-circuit to
/// the clean image with rho = (1, 0).
inline MixResult snapmix(const Image& img_a, const BoxRegion& box_a,
                         const Image& img_b, const BoxRegion& box_b,
                         LabelStrategy labels,
                         const SemanticPercentMap* spm_a = nullptr,
                         const SemanticPercentMap* spm_b = nullptr) {
  MixResult r;
  r.image = snapmix_image(img_a, box_a, img_b, box_b);
  r.strategy = MixStrategy::snapmix;
  r.mixed = true;
  r.box_a = box_a;
  r.box_b = box_b;
  if (box_a.is_empty() || box_b.is_empty()) {
    r.rho_a = 1.0;
    r.rho_b = 0.0;
    return r;
  }
  LabelWeights w;
  if (labels == LabelStrategy::area_ratio) {
    w = area_ratio_labels(box_a);
  } else {
    if (spm_a == nullptr || spm_b == nullptr) {
      throw std::invalid_argument("snapmix: semantic labels need SPMs");
    }
    w = semantic_ratio_labels(*spm_a, box_a, *spm_b, box_b);
  }
  r.rho_a = w.rho_a;
  r.rho_b = w.rho_b;
  return r;
}

/// SPM for the i-th element of the batch being mixed.
using SpmProvider = std::function<const SemanticPercentMap&(std::size_t)>;

/// Optional sink for non-fatal events raised while mixing a batch.
using WarningSink = std::function<void(const std::string&)>;

inline MixResult clean_result(const Image& img, int label,
                              MixStrategy strategy) {
  MixResult r;
  r.image = img;
  r.label_a = label;
  r.label_b = label;
  r.rho_a = 1.0;
  r.rho_b = 0.0;
  r.strategy = strategy;
  r.mixed = false;
  return r;
}

/// Mixes a batch. Each sample independently fires with probability
/// `switch_prob` and is paired with a distinct partner drawn uniformly from
/// the rest of the batch. The random draw order per sample is
///   switch coin, partner, lambda_a, box_a, [lambda_b, box_b]
/// and never depends on the label strategy, so an area-ratio and a
/// semantic-ratio run see identical geometry under the same seed.
inline std::vector<MixResult> apply_mix(std::span<const Image> images,
                                        std::span<const int> labels,
                                        const SpmProvider& spms,
                                        const MixConfig& config, Rng& rng,
                                        const WarningSink& warn = {}) {
  config.validate();
  if (images.size() != labels.size()) {
    throw std::invalid_argument("apply_mix: images/labels size mismatch");
  }
  const std::size_t n = images.size();
  std::vector<MixResult> out;
  out.reserve(n);

  const bool needs_partner = config.strategy == MixStrategy::mixup ||
                             config.strategy == MixStrategy::cutmix ||
                             config.strategy == MixStrategy::snapmix;
  const bool disabled = config.strategy == MixStrategy::none ||
                        config.switch_prob == 0.0 ||
                        (needs_partner && n < 2);
  if (disabled) {
    if (needs_partner && n < 2 && config.switch_prob > 0.0 && warn) {
      warn("apply_mix: batch of size " + std::to_string(n) +
           " cannot be paired; emitting clean samples");
    }
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(clean_result(images[i], labels[i], config.strategy));
    return out;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Image& img = images[i];
    if (uniform01(rng) >= config.switch_prob) {
      out.push_back(clean_result(img, labels[i], config.strategy));
      continue;
    }
    int j = -1;
    if (needs_partner) {
      const int k = uniform_index(rng, static_cast<int>(n) - 1);
      j = k >= static_cast<int>(i) ? k + 1 : k;
    }
    const int w = img.width();
    const int h = img.height();
    MixResult r;
    switch (config.strategy) {
      case MixStrategy::mixup:
        r = mixup(img, images[j], sample_lambda(config.alpha, rng));
        break;
      case MixStrategy::cutmix: {
        const double lam = sample_lambda(config.alpha, rng);
        r = cutmix(img, images[j], sample_box(lam, w, h, rng));
        break;
      }
      case MixStrategy::cutout: {
        const double lam = sample_lambda(config.alpha, rng);
        r = cutout(img, sample_box(lam, w, h, rng));
        break;
      }
      case MixStrategy::snapmix: {
        const double lam_a = sample_lambda(config.alpha, rng);
        const BoxRegion box_a = sample_box(lam_a, w, h, rng);
        BoxRegion box_b = box_a;
        if (!config.symmetric) {
          const double lam_b = sample_lambda(config.alpha, rng);
          box_b = sample_box(lam_b, w, h, rng);
        }
        if (config.label_strategy == LabelStrategy::semantic_ratio) {
          r = snapmix(img, box_a, images[j], box_b, config.label_strategy,
                      &spms(i), &spms(static_cast<std::size_t>(j)));
        } else {
          r = snapmix(img, box_a, images[j], box_b, config.label_strategy);
        }
        break;
      }
      case MixStrategy::none:
        break;
    }
    r.label_a = labels[i];
    r.label_b = j >= 0 ? labels[j] : labels[i];
    r.partner = j;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace snapmix
