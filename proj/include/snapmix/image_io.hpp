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

// Image file I/O and folder ingestion. Decoding and encoding go through
// OpenCV's imgcodecs; all geometry (resize, crop, flip) is done here.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "snapmix/datagen.hpp"
#include "snapmix/image.hpp"
#include "snapmix/random.hpp"
#include "snapmix/resize.hpp"

namespace snapmix {

namespace fs = std::filesystem;

/// Decodes a file into a 3-channel RGB image with values in [0, 1].
/// Returns nullopt when the file cannot be decoded.
inline std::optional<Image> load_image(const fs::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    return std::nullopt;
  }
  if (bgr.empty() || bgr.depth() != CV_8U) return std::nullopt;
  Image img(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[x][2 - c] / 255.0;
  }
  return img;
}

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(
      std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Writes an image losslessly as 8-bit PNG (grey or RGB).
inline void save_png(const fs::path& path, const Image& img) {
  cv::Mat mat;
  if (img.channels() == 1) {
    mat.create(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        mat.at<unsigned char>(y, x) = to_byte(img.at(0, y, x));
  } else {
    mat.create(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < 3; ++c)
          mat.at<cv::Vec3b>(y, x)[2 - c] = to_byte(img.at(c, y, x));
  }
  if (!cv::imwrite(path.string(), mat)) {
    throw std::runtime_error("save_png: cannot write " + path.string());
  }
}

inline Image resize_image(const Image& img, int out_w, int out_h) {
  Image out(img.channels(), out_h, out_w);
  for (int c = 0; c < img.channels(); ++c)
    resize_bilinear_plane(img.plane(c), std::size_t(img.width()), 0, 0,
                          img.width(), img.height(), out.plane(c), out_w,
                          out_h);
  return out;
}

inline Image crop_image(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width() || y0 + h > img.height()) {
    throw std::invalid_argument("crop_image: window out of bounds");
  }
  Image out(img.channels(), h, w);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

inline Image center_crop(const Image& img, int size) {
  return crop_image(img, (img.width() - size) / 2, (img.height() - size) / 2,
                    size, size);
}

inline Image random_crop(const Image& img, int size, Rng& rng) {
  const int x0 = uniform_index(rng, img.width() - size + 1);
  const int y0 = uniform_index(rng, img.height() - size + 1);
  return crop_image(img, x0, y0, size, size);
}

inline Image hflip(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        out.at(c, y, x) = img.at(c, y, img.width() - 1 - x);
  return out;
}

struct IngestOptions {
  int resize = 512;
  int crop = 448;
  std::uint64_t seed = 1;  // split assignment when no train/test folders
};

/// Reads a directory-per-class tree. Images are resized to resize x resize
/// and stored at that size; cropping to `crop` happens at fetch time
/// (random for training, centre for evaluation). If `root` holds `train/`
/// and `test/` subfolders each is read as its split, otherwise a stratified
/// 80/20 split is drawn. Undecodable files are skipped and counted; a class
/// folder without any decodable image is an error.
inline Dataset ingest_folder(
    const fs::path& root, const IngestOptions& opt = {},
    const std::function<void(const std::string&)>& warn = {}) {
  if (opt.crop < 1 || opt.crop > opt.resize) {
    throw std::invalid_argument("ingest_folder: need 1 <= crop <= resize");
  }
  if (!fs::is_directory(root)) {
    throw std::invalid_argument("ingest_folder: not a directory: " +
                                root.string());
  }
  const bool presplit =
      fs::is_directory(root / "train") && fs::is_directory(root / "test");

  auto class_dirs = [](const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  auto files_in = [](const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
  };

  Dataset ds;
  ds.class_names = class_dirs(presplit ? root / "train" : root);
  ds.num_classes = static_cast<int>(ds.class_names.size());
  if (ds.num_classes == 0) {
    throw std::invalid_argument("ingest_folder: no class folders under " +
                                root.string());
  }

  auto load_class = [&](const fs::path& dir, int label) {
    std::vector<Sample> out;
    for (const auto& f : files_in(dir)) {
      auto img = load_image(f);
      if (!img) {
        ++ds.skipped;
        if (warn) warn("ingest_folder: skipping undecodable file " + f.string());
        continue;
      }
      Sample s;
      s.image = resize_image(*img, opt.resize, opt.resize);
      s.label = label;
      s.source = f.string();
      out.push_back(std::move(s));
    }
    if (out.empty()) {
      throw std::invalid_argument("ingest_folder: class '" +
                                  ds.class_names[label] + "' in " +
                                  dir.string() + " has no decodable images");
    }
    return out;
  };

  Rng rng = substream(opt.seed, "split");
  for (int k = 0; k < ds.num_classes; ++k) {
    const std::string& name = ds.class_names[k];
    if (presplit) {
      for (auto& s : load_class(root / "train" / name, k))
        ds.train.push_back(std::move(s));
      if (fs::is_directory(root / "test" / name))
        for (auto& s : load_class(root / "test" / name, k))
          ds.test.push_back(std::move(s));
    } else {
      auto samples = load_class(root / name, k);
      std::shuffle(samples.begin(), samples.end(), rng);
      const int n = static_cast<int>(samples.size());
      const int n_test =
          n < 2 ? 0 : std::clamp(static_cast<int>(std::lround(0.2 * n)), 1, n - 1);
      for (int i = 0; i < n; ++i)
        (i < n - n_test ? ds.train : ds.test).push_back(std::move(samples[i]));
    }
  }
  return ds;
}

/// Manifest describing an ingested dataset (paths point at source files).
inline Manifest manifest_of(const Dataset& ds) {
  Manifest m;
  m.num_classes = ds.num_classes;
  m.skipped = ds.skipped;
  auto add = [&](const std::vector<Sample>& v, Split split) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      ManifestRecord r;
      r.id = std::string(to_string(split)) + "/" + std::to_string(i);
      r.split = to_string(split);
      r.label = v[i].label;
      r.class_name = ds.class_names.at(v[i].label);
      if (!v[i].source.empty()) r.path = v[i].source;
      m.records.push_back(std::move(r));
    }
  };
  add(ds.train, Split::train);
  add(ds.test, Split::test);
  return m;
}

}  // namespace snapmix
