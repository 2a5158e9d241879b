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

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snapmix/image.hpp"
#include "snapmix/model.hpp"
#include "snapmix/resize.hpp"
#include "snapmix/spm.hpp"

namespace snapmix {

/// Channel-weighted sum of the feature maps upsampled to (out_h, out_w),
/// without the final clamp. Linear in `weights`.
inline Map2D cam_preclamp(const ActivationStack& stack,
                          std::span<const double> weights, int out_h,
                          int out_w) {
  if (stack.depth < 1 || stack.height < 1 || stack.width < 1) {
    throw std::invalid_argument("compute_cam: empty activation stack");
  }
  if (weights.size() != static_cast<std::size_t>(stack.depth)) {
    throw std::invalid_argument(
        "compute_cam: weight length " + std::to_string(weights.size()) +
        " does not match feature depth " + std::to_string(stack.depth));
  }
  if (out_h < stack.height || out_w < stack.width) {
    throw std::invalid_argument(
        "compute_cam: output must be at least the feature resolution");
  }
  const std::size_t plane = std::size_t(stack.height) * stack.width;
  std::vector<double> low(plane, 0.0);
  for (int l = 0; l < stack.depth; ++l) {
    const double w = weights[l];
    const double* f = stack.features.data() + l * plane;
    for (std::size_t q = 0; q < plane; ++q) low[q] += w * f[q];
  }
  Map2D cam(out_h, out_w);
  resize_bilinear_plane(low, std::size_t(stack.width), 0, 0, stack.width,
                        stack.height, cam.values, out_w, out_h);
  return cam;
}

/// Class activation map: weighted channel sum, bilinear upsample, then
/// negative evidence clamped to zero.
inline Map2D compute_cam(const ActivationStack& stack,
                         std::span<const double> weights, int out_h,
                         int out_w) {
  Map2D cam = cam_preclamp(stack, weights, out_h, out_w);
  for (double& v : cam.values) v = std::max(0.0, v);
  return cam;
}

/// SPM of a single image under its ground-truth label.
inline SemanticPercentMap image_spm(const ClassifierState& model,
                                    const Image& image, int label) {
  const ModelConfig& cfg = model.config();
  if (label < 0 || label >= cfg.num_classes) {
    throw std::invalid_argument("batch_spms: label " + std::to_string(label) +
                                " out of range");
  }
  const ForwardOutput out = forward(model, image);
  return make_spm(compute_cam(out.features, model.head_row(label),
                              image.height(), image.width()));
}

/// One SPM per image, computed with the model as it currently stands. The
/// pass is inference-only: nothing here touches gradients or parameters.
inline std::vector<SemanticPercentMap> batch_spms(
    const ClassifierState& model, std::span<const Image> images,
    std::span<const int> labels) {
  if (images.size() != labels.size()) {
    throw std::invalid_argument("batch_spms: images/labels size mismatch");
  }
  std::vector<SemanticPercentMap> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    out.push_back(image_spm(model, images[i], labels[i]));
  return out;
}

}  // namespace snapmix
