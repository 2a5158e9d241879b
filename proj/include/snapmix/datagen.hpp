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
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapmix/image.hpp"
#include "snapmix/random.hpp"
#include "snapmix/resize.hpp"

namespace snapmix {

/// Synthetic fine-grained benchmark: every image is one of a few shared,
/// class-independent background motifs with a small class-identifying
/// texture ("cue") stamped at a random location, plus Gaussian noise.
struct SyntheticSpec {
  int num_classes = 10;
  int image_size = 32;
  int channels = 3;
  int cue_size = 4;
  int background_alphabet = 4;
  double noise_std = 0.05;
  int samples_per_class = 60;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_classes < 2)
      throw std::invalid_argument("SyntheticSpec: num_classes must be >= 2");
    if (channels != 1 && channels != 3)
      throw std::invalid_argument("SyntheticSpec: channels must be 1 or 3");
    if (cue_size < 1 || cue_size >= image_size)
      throw std::invalid_argument(
          "SyntheticSpec: need 1 <= cue_size < image_size");
    if (background_alphabet < 1)
      throw std::invalid_argument(
          "SyntheticSpec: background_alphabet must be >= 1");
    if (!(noise_std >= 0.0))
      throw std::invalid_argument("SyntheticSpec: noise_std must be >= 0");
    if (samples_per_class < 2)
      throw std::invalid_argument(
          "SyntheticSpec: samples_per_class must be >= 2");
  }
};

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(std::size_t(h) * w, 0) {}

  std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return bits[std::size_t(y) * width + x]; }
  long count() const {
    return static_cast<long>(std::count(bits.begin(), bits.end(), 1));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/// One labelled image. Synthetic samples carry the ground-truth cue mask.
struct Sample {
  Image image;
  int label = 0;
  std::optional<BinaryMask> semantic_mask;
  std::string source;  // file path for ingested data, empty otherwise

  friend bool operator==(const Sample&, const Sample&) = default;
};

using GroundTruthSample = Sample;

struct Dataset {
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<Sample> train;
  std::vector<Sample> test;
  /// Files skipped during ingestion (undecodable).
  int skipped = 0;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Class cue textures, [num_classes][channels * cue * cue] with values in
/// {0, 1}. Throws when the pattern space cannot hold num_classes distinct
/// patterns.
inline std::vector<std::vector<double>> make_cue_patterns(
    const SyntheticSpec& spec) {
  const long cells = long(spec.channels) * spec.cue_size * spec.cue_size;
  if (cells < 63 && (1L << cells) < spec.num_classes) {
    throw std::invalid_argument(
        "generate: cannot build " + std::to_string(spec.num_classes) +
        " unique cue patterns from " + std::to_string(cells) + " binary cells");
  }
  Rng rng = substream(spec.seed, "cues");
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<double>> patterns;
  int attempts = 0;
  while (int(patterns.size()) < spec.num_classes) {
    if (++attempts > 1000 * spec.num_classes) {
      throw std::invalid_argument("generate: cue patterns are not unique");
    }
    std::vector<double> p(cells);
    for (double& v : p) v = coin(rng) ? 1.0 : 0.0;
    if (std::find(patterns.begin(), patterns.end(), p) == patterns.end())
      patterns.push_back(std::move(p));
  }
  return patterns;
}

/// Smooth background motifs in [0.25, 0.75]: a 4x4 random grid per channel
/// upsampled bilinearly to the image size.
inline std::vector<Image> make_background_motifs(const SyntheticSpec& spec) {
  Rng rng = substream(spec.seed, "backgrounds");
  std::uniform_real_distribution<double> u(0.25, 0.75);
  const int g = std::min(4, spec.image_size);
  std::vector<Image> motifs;
  for (int m = 0; m < spec.background_alphabet; ++m) {
    Image img(spec.channels, spec.image_size, spec.image_size);
    std::vector<double> grid(std::size_t(g) * g);
    for (int c = 0; c < spec.channels; ++c) {
      for (double& v : grid) v = u(rng);
      resize_bilinear_plane(grid, std::size_t(g), 0, 0, g, g, img.plane(c),
                            spec.image_size, spec.image_size);
    }
    motifs.push_back(std::move(img));
  }
  return motifs;
}

/// Stamps `pattern` with its top-left corner at (x, y); the parts falling
/// outside the image are dropped and the mask marks only painted pixels.
inline void paint_cue(Image& image, BinaryMask& mask,
                      const std::vector<double>& pattern, int cue_size, int x,
                      int y) {
  for (int c = 0; c < image.channels(); ++c)
    for (int dy = 0; dy < cue_size; ++dy)
      for (int dx = 0; dx < cue_size; ++dx) {
        const int py = y + dy, px = x + dx;
        if (py < 0 || px < 0 || py >= image.height() || px >= image.width())
          continue;
        image.at(c, py, px) =
            pattern[(std::size_t(c) * cue_size + dy) * cue_size + dx];
        mask.at(py, px) = 1;
      }
}

/// Deterministic train/test split (per class: round(20%) test, >= 1 each).
inline Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const auto patterns = make_cue_patterns(spec);
  const auto motifs = make_background_motifs(spec);
  Rng rng = substream(spec.seed, "samples");
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  for (int k = 0; k < spec.num_classes; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "class_%03d", k);
    ds.class_names.emplace_back(name);
  }
  const int n_test = std::clamp(
      static_cast<int>(std::lround(0.2 * spec.samples_per_class)), 1,
      spec.samples_per_class - 1);
  const int n_train = spec.samples_per_class - n_test;
  const int span = spec.image_size - spec.cue_size;

  for (int k = 0; k < spec.num_classes; ++k) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      const int m = uniform_index(rng, spec.background_alphabet);
      const int x = uniform_index(rng, span + 1);
      const int y = uniform_index(rng, span + 1);
      Sample s;
      s.label = k;
      s.image = motifs[m];
      BinaryMask mask(spec.image_size, spec.image_size);
      paint_cue(s.image, mask, patterns[k], spec.cue_size, x, y);
      if (spec.noise_std > 0.0) {
        for (double& v : s.image.pixels())
          v = std::clamp(v + spec.noise_std * noise(rng), 0.0, 1.0);
      }
      s.semantic_mask = std::move(mask);
      (i < n_train ? ds.train : ds.test).push_back(std::move(s));
    }
  }
  return ds;
}

/// Fraction of the sample's cue pixels that fall inside `box`.
inline double true_semantic_ratio(const Sample& sample, const BoxRegion& box) {
  if (!sample.semantic_mask) {
    throw std::invalid_argument("true_semantic_ratio: sample has no mask");
  }
  const BinaryMask& m = *sample.semantic_mask;
  if (!box.fits(m.width, m.height)) {
    throw std::invalid_argument("true_semantic_ratio: box dims mismatch");
  }
  const long total = m.count();
  if (total == 0) return 0.0;
  long inside = 0;
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) inside += m.at(y, x);
  return double(inside) / double(total);
}

// ---------------------------------------------------------------------------
// Manifest: one JSON object per line.
//
//   {"type":"sample","id":..,"split":"train"|"test","label":int,
//    "class":str,"path":str?,"mask":str?}
//   {"type":"summary","num_classes":int,"samples":int,"skipped":int}
//
// The summary line is always last.

struct ManifestRecord {
  std::string id;
  std::string split;
  int label = 0;
  std::string class_name;
  std::optional<std::string> path;
  std::optional<std::string> mask;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  int num_classes = 0;
  int skipped = 0;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline nlohmann::ordered_json to_json(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["type"] = "sample";
  j["id"] = r.id;
  j["split"] = r.split;
  j["label"] = r.label;
  j["class"] = r.class_name;
  if (r.path) j["path"] = *r.path;
  if (r.mask) j["mask"] = *r.mask;
  return j;
}

inline std::string manifest_text(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) out += to_json(r).dump() + "\n";
  nlohmann::ordered_json s;
  s["type"] = "summary";
  s["num_classes"] = m.num_classes;
  s["samples"] = m.records.size();
  s["skipped"] = m.skipped;
  out += s.dump() + "\n";
  return out;
}

inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  bool summary = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "summary") {
      m.num_classes = j.at("num_classes").get<int>();
      m.skipped = j.at("skipped").get<int>();
      summary = true;
    } else if (type == "sample") {
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      r.split = j.at("split").get<std::string>();
      r.label = j.at("label").get<int>();
      r.class_name = j.at("class").get<std::string>();
      if (j.contains("path")) r.path = j["path"].get<std::string>();
      if (j.contains("mask")) r.mask = j["mask"].get<std::string>();
      m.records.push_back(std::move(r));
    } else {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) +
                                  ": unknown record type '" + type + "'");
    }
  }
  if (!summary) throw std::invalid_argument("manifest: missing summary line");
  return m;
}

}  // namespace snapmix
