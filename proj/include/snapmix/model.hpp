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
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snapmix/image.hpp"
#include "snapmix/mix.hpp"
#include "snapmix/random.hpp"

namespace snapmix {

enum class PoolKind { max, avg };

/// Pixels in [0, 1] are mapped to [-1, 1] on entry to the network.
inline constexpr double kInputCenter = 0.5;
inline constexpr double kInputScale = 2.0;

enum class Fusion { sum, softmax_avg };

/// Architecture of the toy classifier: a stack of conv(k x k, same padding)
/// + ReLU [+ 2x2 stride-2 pool] blocks, global average pooling and a
/// bias-free linear head. The optional mid-level branch (1x1 conv + ReLU,
/// global max pool, linear) reads the penultimate block's output.
struct ModelConfig {
  int in_channels = 3;
  int input_size = 32;
  int num_classes = 10;
  std::vector<int> channels{8, 16, 32};
  std::vector<int> downsample{1, 1, 0};
  int kernel = 3;
  PoolKind pool = PoolKind::max;
  bool mid_branch = false;
  int mid_channels = 16;
  Fusion fusion = Fusion::sum;

  int num_blocks() const { return static_cast<int>(channels.size()); }
  int feature_depth() const { return channels.back(); }

  /// Spatial side of block `b`'s output.
  int block_out_size(int b) const {
    int s = input_size;
    for (int i = 0; i <= b; ++i)
      if (downsample[i]) s /= 2;
    return s;
  }
  int block_in_size(int b) const {
    return b == 0 ? input_size : block_out_size(b - 1);
  }
  int feature_size() const { return block_out_size(num_blocks() - 1); }

  void validate() const {
    if (in_channels != 1 && in_channels != 3)
      throw std::invalid_argument("ModelConfig: in_channels must be 1 or 3");
    if (input_size < 1)
      throw std::invalid_argument("ModelConfig: input_size must be >= 1");
    if (num_classes < 2)
      throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (channels.empty())
      throw std::invalid_argument("ModelConfig: need at least one block");
    if (downsample.size() != channels.size())
      throw std::invalid_argument(
          "ModelConfig: downsample list must match channels list");
    for (int c : channels)
      if (c < 1) throw std::invalid_argument("ModelConfig: channels >= 1");
    if (kernel < 1 || kernel % 2 == 0)
      throw std::invalid_argument("ModelConfig: kernel must be odd");
    int s = input_size;
    for (int d : downsample) {
      if (d) {
        if (s % 2 != 0 || s < 2)
          throw std::invalid_argument(
              "ModelConfig: downsampling requires an even spatial size");
        s /= 2;
      }
    }
    if (mid_branch && (num_blocks() < 2 || mid_channels < 1))
      throw std::invalid_argument(
          "ModelConfig: mid branch needs >= 2 blocks and mid_channels >= 1");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named view into the flat parameter vector.
struct TensorSlot {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

/// Parameter offsets for a given architecture.
struct ParamLayout {
  struct Block {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in = 0;
    int out = 0;
  };
  std::vector<Block> blocks;
  std::size_t head = 0;
  std::size_t mid_weight = 0;
  std::size_t mid_bias = 0;
  std::size_t mid_head = 0;
  /// [0, backbone_end) are the convolutional blocks.
  std::size_t backbone_end = 0;
  std::size_t total = 0;
  std::vector<TensorSlot> slots;

  explicit ParamLayout(const ModelConfig& cfg) {
    std::size_t off = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
      std::size_t n = 1;
      for (int d : shape) n *= static_cast<std::size_t>(d);
      slots.push_back({std::move(name), std::move(shape), off, n});
      const std::size_t at = off;
      off += n;
      return at;
    };
    int cin = cfg.in_channels;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
      const int cout = cfg.channels[b];
      Block blk;
      blk.in = cin;
      blk.out = cout;
      const std::string p = "block" + std::to_string(b) + ".conv.";
      blk.weight = add(p + "weight", {cout, cin, cfg.kernel, cfg.kernel});
      blk.bias = add(p + "bias", {cout});
      blocks.push_back(blk);
      cin = cout;
    }
    backbone_end = off;
    head = add("head.weight", {cfg.num_classes, cfg.feature_depth()});
    if (cfg.mid_branch) {
      const int pen = cfg.channels[cfg.num_blocks() - 2];
      mid_weight = add("mid.conv.weight", {cfg.mid_channels, pen});
      mid_bias = add("mid.conv.bias", {cfg.mid_channels});
      mid_head = add("mid.head.weight", {cfg.num_classes, cfg.mid_channels});
    }
    total = off;
  }
};

class ClassifierState {
 public:
  ClassifierState() = default;

  explicit ClassifierState(ModelConfig config)
      : config_(std::move(config)), layout_(validated(config_)) {
    params_.assign(layout_.total, 0.0);
  }

  /// He-normal conv weights, zero biases, N(0, 1/d) head rows.
  static ClassifierState initialized(const ModelConfig& config, Rng& rng) {
    ClassifierState s(config);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& L = s.layout_;
    const int k2 = config.kernel * config.kernel;
    for (const auto& blk : L.blocks) {
      const double sd = std::sqrt(2.0 / (blk.in * k2));
      for (std::size_t i = 0; i < std::size_t(blk.out) * blk.in * k2; ++i)
        s.params_[blk.weight + i] = sd * normal(rng);
    }
    const double head_sd = std::sqrt(1.0 / config.feature_depth());
    for (std::size_t i = 0;
         i < std::size_t(config.num_classes) * config.feature_depth(); ++i)
      s.params_[L.head + i] = head_sd * normal(rng);
    if (config.mid_branch) {
      const int pen = config.channels[config.num_blocks() - 2];
      const double sd = std::sqrt(2.0 / pen);
      for (std::size_t i = 0; i < std::size_t(config.mid_channels) * pen; ++i)
        s.params_[L.mid_weight + i] = sd * normal(rng);
      const double hsd = std::sqrt(1.0 / config.mid_channels);
      for (std::size_t i = 0;
           i < std::size_t(config.num_classes) * config.mid_channels; ++i)
        s.params_[L.mid_head + i] = hsd * normal(rng);
    }
    return s;
  }

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  /// Row of the main head for class `y` (length = feature depth).
  std::span<const double> head_row(int y) const {
    const int d = config_.feature_depth();
    return {params_.data() + layout_.head + std::size_t(y) * d,
            std::size_t(d)};
  }
  std::span<double> head_weights() {
    return {params_.data() + layout_.head,
            std::size_t(config_.num_classes) * config_.feature_depth()};
  }

 private:
  static const ModelConfig& validated(const ModelConfig& c) {
    c.validate();
    return c;
  }

  ModelConfig config_;
  ParamLayout layout_{ModelConfig{}};
  std::vector<double> params_;
};

/// Everything the backward pass needs from one forward pass.
struct ForwardCache {
  struct Block {
    std::vector<double> pre;     // conv + bias, before ReLU
    std::vector<double> out;     // after ReLU and optional pool
    std::vector<int> argmax;     // max-pool source indices into pre
  };
  std::vector<double> input;
  std::vector<Block> blocks;
  std::vector<double> gap;
  std::vector<double> logits;
  std::vector<double> mid_pre;
  std::vector<int> mid_argmax;
  std::vector<double> mid_pool;
  std::vector<double> mid_logits;
};

/// Final-stage feature maps of one image: [depth, size, size].
struct ActivationStack {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<double> features;

  double at(int l, int y, int x) const {
    return features[(std::size_t(l) * height + y) * width + x];
  }
};

struct ForwardOutput {
  std::vector<double> logits;
  ActivationStack features;
  std::optional<std::vector<double>> mid_logits;
};

namespace detail {

inline void conv_forward(const double* in, int cin, int size, const double* w,
                         const double* b, int cout, int k, double* out) {
  const int p = k / 2;
  const std::size_t plane = std::size_t(size) * size;
  for (int o = 0; o < cout; ++o) {
    double* op = out + o * plane;
    std::fill(op, op + plane, b[o]);
    for (int i = 0; i < cin; ++i) {
      const double* ip = in + i * plane;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - p;
        const int y_lo = std::max(0, -dy), y_hi = std::min(size, size - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - p;
          const int x_lo = std::max(0, -dx), x_hi = std::min(size, size - dx);
          const double wv = w[((std::size_t(o) * cin + i) * k + ky) * k + kx];
          for (int y = y_lo; y < y_hi; ++y) {
            double* orow = op + std::size_t(y) * size;
            const double* irow = ip + std::size_t(y + dy) * size + dx;
            for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

/// Accumulates dW, db and (if d_in != nullptr) d_in for one conv layer.
inline void conv_backward(const double* in, int cin, int size, const double* w,
                          int cout, int k, const double* d_pre, double* d_w,
                          double* d_b, double* d_in) {
  const int p = k / 2;
  const std::size_t plane = std::size_t(size) * size;
  for (int o = 0; o < cout; ++o) {
    const double* gp = d_pre + o * plane;
    double sb = 0.0;
    for (std::size_t q = 0; q < plane; ++q) sb += gp[q];
    d_b[o] += sb;
    for (int i = 0; i < cin; ++i) {
      const double* ip = in + i * plane;
      double* dip = d_in ? d_in + i * plane : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - p;
        const int y_lo = std::max(0, -dy), y_hi = std::min(size, size - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - p;
          const int x_lo = std::max(0, -dx), x_hi = std::min(size, size - dx);
          const std::size_t widx = ((std::size_t(o) * cin + i) * k + ky) * k + kx;
          const double wv = w[widx];
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const double* grow = gp + std::size_t(y) * size;
            const double* irow = ip + std::size_t(y + dy) * size + dx;
            for (int x = x_lo; x < x_hi; ++x) acc += grow[x] * irow[x];
            if (dip) {
              double* drow = dip + std::size_t(y + dy) * size + dx;
              for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * grow[x];
            }
          }
          d_w[widx] += acc;
        }
      }
    }
  }
}

inline std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace detail

/// Runs the network on one image, filling `cache` for a later backward pass.
inline void forward_cached(const ClassifierState& state, const Image& image,
                           ForwardCache& cache) {
  const ModelConfig& cfg = state.config();
  if (image.channels() != cfg.in_channels || image.height() != cfg.input_size ||
      image.width() != cfg.input_size) {
    throw std::invalid_argument(
        "forward: image [" + std::to_string(image.channels()) + "," +
        std::to_string(image.height()) + "," + std::to_string(image.width()) +
        "] does not match model input [" + std::to_string(cfg.in_channels) +
        "," + std::to_string(cfg.input_size) + "," +
        std::to_string(cfg.input_size) + "]");
  }
  const ParamLayout& L = state.layout();
  const double* P = state.params().data();
  cache.input = image.pixels();
  for (double& v : cache.input) v = (v - kInputCenter) * kInputScale;
  cache.blocks.resize(cfg.num_blocks());

  const double* in = cache.input.data();
  for (int b = 0; b < cfg.num_blocks(); ++b) {
    const auto& blk = L.blocks[b];
    auto& bc = cache.blocks[b];
    const int size = cfg.block_in_size(b);
    const std::size_t plane = std::size_t(size) * size;
    bc.pre.resize(blk.out * plane);
    detail::conv_forward(in, blk.in, size, P + blk.weight, P + blk.bias,
                         blk.out, cfg.kernel, bc.pre.data());
    if (!cfg.downsample[b]) {
      bc.out.resize(bc.pre.size());
      for (std::size_t q = 0; q < bc.pre.size(); ++q)
        bc.out[q] = std::max(0.0, bc.pre[q]);
      bc.argmax.clear();
    } else {
      const int os = size / 2;
      bc.out.assign(std::size_t(blk.out) * os * os, 0.0);
      bc.argmax.assign(cfg.pool == PoolKind::max ? bc.out.size() : 0, 0);
      for (int c = 0; c < blk.out; ++c) {
        const double* pp = bc.pre.data() + c * plane;
        for (int y = 0; y < os; ++y) {
          for (int x = 0; x < os; ++x) {
            const int i00 = (2 * y) * size + 2 * x;
            const int idx[4] = {i00, i00 + 1, i00 + size, i00 + size + 1};
            const std::size_t o = (std::size_t(c) * os + y) * os + x;
            if (cfg.pool == PoolKind::max) {
              int best = idx[0];
              for (int t = 1; t < 4; ++t)
                if (pp[idx[t]] > pp[best]) best = idx[t];
              bc.out[o] = std::max(0.0, pp[best]);
              bc.argmax[o] = best;
            } else {
              double s = 0.0;
              for (int t = 0; t < 4; ++t) s += std::max(0.0, pp[idx[t]]);
              bc.out[o] = 0.25 * s;
            }
          }
        }
      }
    }
    in = bc.out.data();
  }

  const int d = cfg.feature_depth();
  const int fs = cfg.feature_size();
  const std::size_t fplane = std::size_t(fs) * fs;
  const auto& feat = cache.blocks.back().out;
  cache.gap.assign(d, 0.0);
  for (int l = 0; l < d; ++l) {
    double s = 0.0;
    for (std::size_t q = 0; q < fplane; ++q) s += feat[l * fplane + q];
    cache.gap[l] = s / double(fplane);
  }
  cache.logits.assign(cfg.num_classes, 0.0);
  for (int k = 0; k < cfg.num_classes; ++k) {
    double s = 0.0;
    for (int l = 0; l < d; ++l) s += P[L.head + std::size_t(k) * d + l] * cache.gap[l];
    cache.logits[k] = s;
  }

  if (cfg.mid_branch) {
    const int pen_c = cfg.channels[cfg.num_blocks() - 2];
    const int ps = cfg.block_out_size(cfg.num_blocks() - 2);
    const std::size_t pplane = std::size_t(ps) * ps;
    const auto& pen = cache.blocks[cfg.num_blocks() - 2].out;
    const int m = cfg.mid_channels;
    cache.mid_pre.resize(std::size_t(m) * pplane);
    detail::conv_forward(pen.data(), pen_c, ps, P + L.mid_weight,
                         P + L.mid_bias, m, 1, cache.mid_pre.data());
    cache.mid_argmax.assign(m, 0);
    cache.mid_pool.assign(m, 0.0);
    for (int c = 0; c < m; ++c) {
      const double* mp = cache.mid_pre.data() + c * pplane;
      std::size_t best = 0;
      for (std::size_t q = 1; q < pplane; ++q)
        if (mp[q] > mp[best]) best = q;
      cache.mid_argmax[c] = static_cast<int>(best);
      cache.mid_pool[c] = std::max(0.0, mp[best]);
    }
    cache.mid_logits.assign(cfg.num_classes, 0.0);
    for (int k = 0; k < cfg.num_classes; ++k) {
      double s = 0.0;
      for (int c = 0; c < m; ++c)
        s += P[L.mid_head + std::size_t(k) * m + c] * cache.mid_pool[c];
      cache.mid_logits[k] = s;
    }
  } else {
    cache.mid_pre.clear();
    cache.mid_argmax.clear();
    cache.mid_pool.clear();
    cache.mid_logits.clear();
  }
}

inline ForwardOutput forward(const ClassifierState& state, const Image& image) {
  ForwardCache cache;
  forward_cached(state, image, cache);
  const ModelConfig& cfg = state.config();
  ForwardOutput out;
  out.logits = cache.logits;
  out.features.depth = cfg.feature_depth();
  out.features.height = cfg.feature_size();
  out.features.width = cfg.feature_size();
  out.features.features = std::move(cache.blocks.back().out);
  if (cfg.mid_branch) out.mid_logits = cache.mid_logits;
  return out;
}

/// Accumulates parameter gradients into `grad` given d(loss)/d(logits) for
/// the main head and, when the mid branch exists, for the mid head. The mid
/// branch never propagates into backbone parameters.
inline void backward(const ClassifierState& state, const ForwardCache& cache,
                     std::span<const double> d_logits,
                     std::span<const double> d_mid_logits,
                     std::span<double> grad) {
  const ModelConfig& cfg = state.config();
  const ParamLayout& L = state.layout();
  const double* P = state.params().data();
  double* G = grad.data();
  const int d = cfg.feature_depth();
  const int K = cfg.num_classes;

  std::vector<double> d_gap(d, 0.0);
  for (int k = 0; k < K; ++k) {
    const double g = d_logits[k];
    if (g == 0.0) continue;
    for (int l = 0; l < d; ++l) {
      G[L.head + std::size_t(k) * d + l] += g * cache.gap[l];
      d_gap[l] += P[L.head + std::size_t(k) * d + l] * g;
    }
  }

  if (cfg.mid_branch && !d_mid_logits.empty()) {
    const int m = cfg.mid_channels;
    const int pen_c = cfg.channels[cfg.num_blocks() - 2];
    const int ps = cfg.block_out_size(cfg.num_blocks() - 2);
    const std::size_t pplane = std::size_t(ps) * ps;
    const auto& pen = cache.blocks[cfg.num_blocks() - 2].out;
    std::vector<double> d_pool(m, 0.0);
    for (int k = 0; k < K; ++k) {
      const double g = d_mid_logits[k];
      if (g == 0.0) continue;
      for (int c = 0; c < m; ++c) {
        G[L.mid_head + std::size_t(k) * m + c] += g * cache.mid_pool[c];
        d_pool[c] += P[L.mid_head + std::size_t(k) * m + c] * g;
      }
    }
    for (int c = 0; c < m; ++c) {
      const std::size_t q = cache.mid_argmax[c];
      if (cache.mid_pre[c * pplane + q] <= 0.0 || d_pool[c] == 0.0) continue;
      G[L.mid_bias + c] += d_pool[c];
      for (int i = 0; i < pen_c; ++i)
        G[L.mid_weight + std::size_t(c) * pen_c + i] +=
            d_pool[c] * pen[i * pplane + q];
    }
  }

  // d(loss)/d(block output), starting from the GAP.
  const int fs = cfg.feature_size();
  const std::size_t fplane = std::size_t(fs) * fs;
  std::vector<double> d_out(std::size_t(d) * fplane);
  for (int l = 0; l < d; ++l)
    std::fill_n(d_out.begin() + l * fplane, fplane, d_gap[l] / double(fplane));

  std::vector<double> d_pre, d_in;
  for (int b = cfg.num_blocks() - 1; b >= 0; --b) {
    const auto& blk = L.blocks[b];
    const auto& bc = cache.blocks[b];
    const int size = cfg.block_in_size(b);
    const std::size_t plane = std::size_t(size) * size;
    d_pre.assign(std::size_t(blk.out) * plane, 0.0);
    if (!cfg.downsample[b]) {
      for (std::size_t q = 0; q < d_pre.size(); ++q)
        d_pre[q] = bc.pre[q] > 0.0 ? d_out[q] : 0.0;
    } else {
      const int os = size / 2;
      for (int c = 0; c < blk.out; ++c) {
        const double* pp = bc.pre.data() + c * plane;
        double* dp = d_pre.data() + c * plane;
        for (int y = 0; y < os; ++y) {
          for (int x = 0; x < os; ++x) {
            const std::size_t o = (std::size_t(c) * os + y) * os + x;
            const double g = d_out[o];
            if (cfg.pool == PoolKind::max) {
              const int src = bc.argmax[o];
              if (pp[src] > 0.0) dp[src] += g;
            } else {
              const int i00 = (2 * y) * size + 2 * x;
              const int idx[4] = {i00, i00 + 1, i00 + size, i00 + size + 1};
              for (int t = 0; t < 4; ++t)
                if (pp[idx[t]] > 0.0) dp[idx[t]] += 0.25 * g;
            }
          }
        }
      }
    }
    const double* in = b == 0 ? cache.input.data() : cache.blocks[b - 1].out.data();
    double* din = nullptr;
    if (b > 0) {
      d_in.assign(std::size_t(blk.in) * plane, 0.0);
      din = d_in.data();
    }
    detail::conv_backward(in, blk.in, size, P + blk.weight, blk.out,
                          cfg.kernel, d_pre.data(), G + blk.weight,
                          G + blk.bias, din);
    if (b > 0) d_out.swap(d_in);
  }
}

struct MixedTarget {
  int label_a = 0;
  int label_b = 0;
  double rho_a = 1.0;
  double rho_b = 0.0;
};

inline MixedTarget target_of(const MixResult& r) {
  return {r.label_a, r.label_b, r.rho_a, r.rho_b};
}

inline void validate_target(const MixedTarget& t, int num_classes) {
  if (t.label_a < 0 || t.label_a >= num_classes || t.label_b < 0 ||
      t.label_b >= num_classes) {
    throw std::invalid_argument("MixedTarget: label out of range");
  }
  if (!(t.rho_a >= 0.0 && t.rho_a <= 1.0 && t.rho_b >= 0.0 && t.rho_b <= 1.0)) {
    throw std::invalid_argument("MixedTarget: weights must be in [0,1]");
  }
}

/// rho_a * CE(logits, a) + rho_b * CE(logits, b). If `d_logits` is non-empty
/// it receives the gradient with respect to the logits.
inline double mixed_loss(std::span<const double> logits,
                         const MixedTarget& target,
                         std::span<double> d_logits = {}) {
  validate_target(target, static_cast<int>(logits.size()));
  const double lse = detail::log_sum_exp(logits);
  const double loss = target.rho_a * (lse - logits[target.label_a]) +
                      target.rho_b * (lse - logits[target.label_b]);
  if (!d_logits.empty()) {
    const double mass = target.rho_a + target.rho_b;
    for (std::size_t k = 0; k < logits.size(); ++k)
      d_logits[k] = mass * std::exp(logits[k] - lse);
    d_logits[target.label_a] -= target.rho_a;
    d_logits[target.label_b] -= target.rho_b;
  }
  return loss;
}

inline int predict_from_logits(std::span<const double> logits) {
  return static_cast<int>(detail::argmax_lowest(logits));
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double lse = detail::log_sum_exp(z);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
  return p;
}

/// Fuses main and mid-branch logits into the score used for prediction.
inline std::vector<double> fuse_logits(std::span<const double> main,
                                       std::span<const double> mid,
                                       Fusion fusion) {
  std::vector<double> s(main.size());
  if (fusion == Fusion::sum) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = main[i] + mid[i];
  } else {
    const auto pa = softmax(main);
    const auto pb = softmax(mid);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * (pa[i] + pb[i]);
  }
  return s;
}

inline int predict(const ClassifierState& state, const Image& image) {
  const ForwardOutput out = forward(state, image);
  if (!out.mid_logits) return predict_from_logits(out.logits);
  return predict_from_logits(
      fuse_logits(out.logits, *out.mid_logits, state.config().fusion));
}

/// SGD with momentum (v = mu * v + g + wd * w; w -= lr * v).
struct SgdOptimizer {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<double> velocity;

  void step(std::vector<double>& params, std::span<const double> grad) {
    if (velocity.size() != params.size()) velocity.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * params[i];
      params[i] -= lr * velocity[i];
    }
  }
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-head weights of the training objective. The mid-branch term is only
/// used when the branch exists.
struct LossWeights {
  double main = 1.0;
  double mid = 1.0;
};

/// Mean objective and its gradient over a batch, without updating anything.
inline double batch_loss_and_grad(const ClassifierState& state,
                                  std::span<const MixResult> batch,
                                  std::vector<double>& grad,
                                  LossWeights weights = {}) {
  const ModelConfig& cfg = state.config();
  grad.assign(state.num_params(), 0.0);
  ForwardCache cache;
  std::vector<double> d_logits(cfg.num_classes), d_mid(cfg.num_classes);
  double total = 0.0;
  for (const MixResult& r : batch) {
    forward_cached(state, r.image, cache);
    const MixedTarget t = target_of(r);
    double loss = weights.main * mixed_loss(cache.logits, t, d_logits);
    for (double& g : d_logits) g *= weights.main;
    std::span<const double> dm;
    if (cfg.mid_branch) {
      loss += weights.mid * mixed_loss(cache.mid_logits, t, d_mid);
      for (double& g : d_mid) g *= weights.mid;
      dm = d_mid;
    }
    total += loss;
    backward(state, cache, d_logits, dm, grad);
  }
  const double inv = 1.0 / double(batch.size());
  for (double& g : grad) g *= inv;
  return total * inv;
}

/// One optimizer update on the mean mixed loss of `batch`. Returns the loss.
/// `batch_seed` only appears in the diagnostic of a non-finite loss.
inline double train_step(ClassifierState& state, SgdOptimizer& opt,
                         std::span<const MixResult> batch,
                         std::uint64_t batch_seed = 0,
                         LossWeights weights = {}) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  std::vector<double> grad;
  const double loss = batch_loss_and_grad(state, batch, grad, weights);
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss("train_step: non-finite loss (" + std::to_string(loss) +
                        ") at batch seed " + std::to_string(batch_seed));
  }
  opt.step(state.params(), grad);
  return loss;
}

}  // namespace snapmix
