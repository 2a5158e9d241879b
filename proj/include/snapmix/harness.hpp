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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapmix/cam.hpp"
#include "snapmix/checkpoint.hpp"
#include "snapmix/config.hpp"
#include "snapmix/datagen.hpp"
#include "snapmix/image_io.hpp"
#include "snapmix/mix.hpp"
#include "snapmix/model.hpp"
#include "snapmix/random.hpp"

namespace snapmix {

namespace fs = std::filesystem;

using LogFn = std::function<void(const std::string&)>;

/// Raised when a run directory already holds artifacts and `force` is off.
class ArtifactExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Data plumbing

inline Dataset load_dataset(const ExperimentConfig& cfg, const LogFn& log = {}) {
  if (cfg.data.source == DataSource::synthetic) return generate(cfg.data.synthetic);
  IngestOptions opt;
  opt.resize = cfg.data.resize;
  opt.crop = cfg.data.crop;
  opt.seed = cfg.data.synthetic.seed;
  return ingest_folder(cfg.data.path, opt, log);
}

inline ModelConfig model_config_for(const ExperimentConfig& cfg,
                                    const Dataset& ds) {
  ModelConfig mc;
  if (cfg.data.source == DataSource::synthetic) {
    mc.in_channels = cfg.data.synthetic.channels;
    mc.input_size = cfg.data.synthetic.image_size;
  } else {
    mc.in_channels = 3;
    mc.input_size = cfg.data.crop;
  }
  mc.num_classes = ds.num_classes;
  mc.channels = cfg.model.channels;
  mc.downsample = cfg.model.downsample;
  mc.kernel = cfg.model.kernel;
  mc.pool = cfg.model.pool;
  mc.mid_branch = cfg.model.mid_branch;
  mc.mid_channels = cfg.model.mid_channels;
  mc.fusion = cfg.model.fusion;
  mc.validate();
  return mc;
}

/// Training view of a sample: random crop (folder data) and optional flip.
inline Image train_view(const Sample& s, const DataConfig& data, Rng& rng) {
  Image img = data.source == DataSource::folder
                  ? random_crop(s.image, data.crop, rng)
                  : s.image;
  if (data.flip_enabled() && uniform01(rng) < 0.5) img = hflip(img);
  return img;
}

/// Evaluation view: centre crop for folder data, identity otherwise.
inline Image eval_view(const Sample& s, const DataConfig& data) {
  return data.source == DataSource::folder ? center_crop(s.image, data.crop)
                                           : s.image;
}

inline double accuracy_percent(const ClassifierState& model,
                               const std::vector<Sample>& samples,
                               const DataConfig& data) {
  if (samples.empty()) return 0.0;
  long correct = 0;
  for (const auto& s : samples)
    if (predict(model, eval_view(s, data)) == s.label) ++correct;
  return 100.0 * double(correct) / double(samples.size());
}

// ---------------------------------------------------------------------------
// Reports

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> test_acc;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  double best_acc = 0.0;
  double mean_final_k_acc = 0.0;
  int final_k = 10;
  double wall_time_s = 0.0;
  std::string config_hash;
  int seed = 0;
  std::string strategy;
  bool failed = false;
  std::string message;

  std::vector<double> accuracies() const {
    std::vector<double> v;
    for (const auto& e : epochs)
      if (e.test_acc) v.push_back(*e.test_acc);
    return v;
  }
};

/// Mean of the last k recorded accuracies (all of them if fewer than k).
inline double mean_final_k(const std::vector<double>& acc, int k) {
  if (acc.empty()) return 0.0;
  const std::size_t n = std::min<std::size_t>(acc.size(), std::size_t(k));
  double s = 0.0;
  for (std::size_t i = acc.size() - n; i < acc.size(); ++i) s += acc[i];
  return s / double(n);
}

inline void finalize_metrics(RunReport& r) {
  const auto acc = r.accuracies();
  r.best_acc = acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
  r.mean_final_k_acc = mean_final_k(acc, r.final_k);
}

inline std::string fmt_num(double v) { return config_detail::fmt_double(v); }

inline std::string epochs_csv(const RunReport& r) {
  std::string out = "epoch,lr,train_loss,test_acc\n";
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch) + "," + fmt_num(e.lr) + "," +
           fmt_num(e.train_loss) + "," + (e.test_acc ? fmt_num(*e.test_acc) : "") +
           "\n";
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["strategy"] = r.strategy;
  j["status"] = r.failed ? "failed" : "ok";
  j["message"] = r.message;
  j["epochs_completed"] = r.epochs.size();
  j["best_acc"] = r.best_acc;
  j["mean_final_k_acc"] = r.mean_final_k_acc;
  j["final_k"] = r.final_k;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

/// Write-to-temp then rename, so readers never see a half-written file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Creates `dir`; refuses a non-empty existing directory unless `force`.
inline void prepare_run_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ArtifactExists("output directory '" + dir.string() +
                         "' is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);
}

// ---------------------------------------------------------------------------
// Training

struct RunOptions {
  std::optional<fs::path> out_dir;
  bool force = false;
  LogFn log;
  /// Reuse an already-materialized dataset instead of loading it again.
  const Dataset* dataset = nullptr;
};

struct RunOutcome {
  RunReport report;
  ClassifierState model;
  SgdOptimizer optimizer;
  std::map<std::string, std::string> rng_states;
};

inline void persist_run(const fs::path& dir, const ExperimentConfig& cfg,
                        const RunOutcome& o) {
  write_file_atomic(dir / "config.cfg", canonical_config(cfg));
  write_file_atomic(dir / "epochs.csv", epochs_csv(o.report));
  write_file_atomic(dir / "summary.json", summary_json(o.report).dump(2) + "\n");
  Checkpoint ck;
  ck.model = o.model;
  ck.velocity = o.optimizer.velocity;
  ck.epoch = static_cast<int>(o.report.epochs.size());
  ck.rng_states = o.rng_states;
  std::ostringstream bin;
  write_checkpoint(bin, ck);
  write_file_atomic(dir / "checkpoint.bin", bin.str());
}

/// Trains one model under `cfg` and `seed`. All randomness flows from the
/// seed through the named streams "init", "data" and "boxes". A non-finite
/// loss stops training and yields a report flagged failed (persisted as
/// far as it got when an output directory is given).
inline RunOutcome run_experiment(const ExperimentConfig& cfg, int seed,
                                 const RunOptions& opt = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (opt.out_dir) prepare_run_dir(*opt.out_dir, opt.force);

  std::optional<Dataset> owned;
  if (!opt.dataset) owned = load_dataset(cfg, opt.log);
  const Dataset& ds = opt.dataset ? *opt.dataset : *owned;
  if (ds.train.empty()) throw std::invalid_argument("run_experiment: empty training set");

  const ModelConfig mc = model_config_for(cfg, ds);
  Rng init_rng = substream(std::uint64_t(seed), "init");
  Rng data_rng = substream(std::uint64_t(seed), "data");
  Rng box_rng = substream(std::uint64_t(seed), "boxes");

  RunOutcome o;
  o.model = ClassifierState::initialized(mc, init_rng);
  o.optimizer.lr = cfg.train.lr;
  o.optimizer.momentum = cfg.train.momentum;
  o.optimizer.weight_decay = cfg.train.weight_decay;
  o.report.config_hash = config_hash(cfg);
  o.report.seed = seed;
  o.report.final_k = cfg.train.final_k;
  o.report.strategy = std::string(to_string(cfg.mix.strategy));

  const bool need_spm = cfg.mix.strategy == MixStrategy::snapmix &&
                        cfg.mix.label_strategy == LabelStrategy::semantic_ratio &&
                        cfg.mix.switch_prob > 0.0;
  const std::size_t n = ds.train.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.train.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  bool warned = false;
  const WarningSink warn = [&](const std::string& m) {
    if (!warned && opt.log) opt.log(m);
    warned = true;
  };

  try {
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
      const double lr = lr_at_epoch(cfg.train, epoch);
      o.optimizer.lr = lr;
      std::shuffle(order.begin(), order.end(), data_rng);
      double loss_sum = 0.0;
      std::size_t seen = 0;
      for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
        const std::size_t end = std::min(n, start + bs);
        std::vector<Image> images;
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) {
          images.push_back(train_view(ds.train[order[i]], cfg.data, data_rng));
          labels.push_back(ds.train[order[i]].label);
        }
        std::vector<SemanticPercentMap> spms;
        if (need_spm) spms = batch_spms(o.model, images, labels);
        const SpmProvider provider = [&spms](std::size_t i) -> const SemanticPercentMap& {
          return spms.at(i);
        };
        const auto mixed = apply_mix(images, labels, provider, cfg.mix, box_rng, warn);
        const std::uint64_t batch_seed =
            splitmix64(std::uint64_t(seed) ^ (std::uint64_t(epoch) << 32) ^ b);
        const double loss = train_step(o.model, o.optimizer, mixed, batch_seed);
        loss_sum += loss * double(mixed.size());
        seen += mixed.size();
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.train_loss = loss_sum / double(seen);
      if ((epoch + 1) % cfg.train.eval_every == 0 || epoch + 1 == cfg.train.epochs)
        rec.test_acc = accuracy_percent(o.model, ds.test, cfg.data);
      o.report.epochs.push_back(rec);
      if (opt.log) {
        std::ostringstream m;
        m << "epoch " << epoch << " lr " << lr << " loss " << rec.train_loss;
        if (rec.test_acc) m << " acc " << *rec.test_acc;
        opt.log(m.str());
      }
    }
  } catch (const NonFiniteLoss& e) {
    o.report.failed = true;
    o.report.message = e.what();
  }

  finalize_metrics(o.report);
  o.rng_states = {{"init", rng_state(init_rng)},
                  {"data", rng_state(data_rng)},
                  {"boxes", rng_state(box_rng)}};
  o.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opt.out_dir) persist_run(*opt.out_dir, cfg, o);
  return o;
}

// ---------------------------------------------------------------------------
// Multi-seed tables

struct TableRow {
  std::string name;
  ExperimentConfig config;
  std::vector<RunReport> runs;
  double mean_acc = 0.0;  // mean over seeds of mean_final_k_acc
  double std_acc = 0.0;   // sample standard deviation over seeds
  double mean_best_acc = 0.0;
};

inline void summarize_row(TableRow& row) {
  const std::size_t n = row.runs.size();
  if (n == 0) return;
  double s = 0.0, sb = 0.0;
  for (const auto& r : row.runs) {
    s += r.mean_final_k_acc;
    sb += r.best_acc;
  }
  row.mean_acc = s / double(n);
  row.mean_best_acc = sb / double(n);
  double v = 0.0;
  for (const auto& r : row.runs) v += std::pow(r.mean_final_k_acc - row.mean_acc, 2);
  row.std_acc = n > 1 ? std::sqrt(v / double(n - 1)) : 0.0;
}

struct TableOptions {
  std::optional<fs::path> out_dir;
  bool force = false;
  LogFn log;
};

/// Runs `cfg` once per seed in cfg.train.seeds. When an output directory
/// is given each run lands in <out>/runs/<config_hash>-seed<k>/.
inline TableRow run_row(const std::string& name, const ExperimentConfig& cfg,
                        const Dataset& ds, const TableOptions& opt) {
  TableRow row;
  row.name = name;
  row.config = cfg;
  for (int seed : cfg.train.seeds) {
    RunOptions ro;
    ro.dataset = &ds;
    ro.force = opt.force;
    if (opt.out_dir)
      ro.out_dir = *opt.out_dir / "runs" /
                   (config_hash(cfg) + "-seed" + std::to_string(seed));
    auto o = run_experiment(cfg, seed, ro);
    if (opt.log) {
      std::ostringstream m;
      m << name << " seed " << seed << ": final-k acc " << o.report.mean_final_k_acc
        << " best " << o.report.best_acc << " (" << o.report.wall_time_s << " s)";
      opt.log(m.str());
    }
    row.runs.push_back(std::move(o.report));
  }
  summarize_row(row);
  return row;
}

inline std::string table_csv(const std::vector<TableRow>& rows) {
  std::string out =
      "name,strategy,symmetric,label_strategy,alpha,switch_prob,seeds,mean_acc,"
      "std_acc,mean_best_acc,config_hash\n";
  for (const auto& r : rows) {
    out += r.name + "," + std::string(to_string(r.config.mix.strategy)) + "," +
           (r.config.mix.symmetric ? "true" : "false") + "," +
           std::string(to_string(r.config.mix.label_strategy)) + "," +
           fmt_num(r.config.mix.alpha) + "," + fmt_num(r.config.mix.switch_prob) +
           "," + std::to_string(r.runs.size()) + "," + fmt_num(r.mean_acc) + "," +
           fmt_num(r.std_acc) + "," + fmt_num(r.mean_best_acc) + "," +
           config_hash(r.config) + "\n";
  }
  return out;
}

inline std::string table_text(const std::vector<TableRow>& rows) {
  std::size_t w = 4;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %7s  %8s  %s\n", int(w), "name",
                "mean_acc", "std", "best_acc", "config_hash");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %7.2f  %8.2f  %s\n", int(w),
                  r.name.c_str(), r.mean_acc, r.std_acc, r.mean_best_acc,
                  config_hash(r.config).c_str());
    os << buf;
  }
  return os.str();
}

inline void persist_table(const fs::path& dir, const std::string& stem,
                          const std::vector<TableRow>& rows) {
  fs::create_directories(dir);
  write_file_atomic(dir / (stem + ".csv"), table_csv(rows));
  write_file_atomic(dir / (stem + ".txt"), table_text(rows));
}

/// Configuration of one ablation cell: snapmix with the given geometry and
/// label rule. (symmetric, area_ratio) is CutMix; (asymmetric,
/// semantic_ratio) is SnapMix.
inline ExperimentConfig ablation_cell(const ExperimentConfig& base, bool symmetric,
                                      LabelStrategy labels) {
  ExperimentConfig c = base;
  c.mix.strategy = MixStrategy::snapmix;
  c.mix.symmetric = symmetric;
  c.mix.label_strategy = labels;
  return c;
}

inline std::string ablation_cell_name(bool symmetric, LabelStrategy labels) {
  return std::string(symmetric ? "S-Mix" : "AS-Mix") + "+" +
         (labels == LabelStrategy::area_ratio ? "AR-label" : "SR-label");
}

/// {symmetric, asymmetric} x {area_ratio, semantic_ratio}, optionally
/// followed by a mixup row using the base alpha and switch probability.
inline std::vector<TableRow> ablation_grid(const ExperimentConfig& base,
                                           bool include_mixup = false,
                                           const TableOptions& opt = {}) {
  base.validate();
  const Dataset ds = load_dataset(base, opt.log);
  std::vector<TableRow> rows;
  for (bool sym : {true, false})
    for (LabelStrategy ls : {LabelStrategy::area_ratio, LabelStrategy::semantic_ratio})
      rows.push_back(run_row(ablation_cell_name(sym, ls),
                             ablation_cell(base, sym, ls), ds, opt));
  if (include_mixup) {
    ExperimentConfig c = base;
    c.mix.strategy = MixStrategy::mixup;
    rows.push_back(run_row("MixUp", c, ds, opt));
  }
  if (opt.out_dir) persist_table(*opt.out_dir, "ablation", rows);
  return rows;
}

/// One multi-seed row per alpha value.
inline std::vector<TableRow> alpha_sweep(const ExperimentConfig& base,
                                         const std::vector<double>& alphas,
                                         const TableOptions& opt = {}) {
  base.validate();
  for (double a : alphas)
    if (!(a > 0.0)) throw ConfigError("alpha_sweep: all alphas must be > 0");
  const Dataset ds = load_dataset(base, opt.log);
  std::vector<TableRow> rows;
  for (double a : alphas) {
    ExperimentConfig c = base;
    c.mix.alpha = a;
    rows.push_back(run_row("alpha=" + fmt_num(a), c, ds, opt));
  }
  if (opt.out_dir) persist_table(*opt.out_dir, "sweep", rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Label-noise benchmark

struct NoiseReport {
  double mae_semantic = 0.0;
  double mae_area = 0.0;
  int trials = 0;
};

/// Measures how far each label rule's rho_b strays from the true fraction of
/// the source image's cue that ends up pasted. Per trial: a distinct pair
/// (a, b), boxes drawn as in training (independent unless `mix.symmetric`),
/// rho_b from semantic_ratio_labels with the model's SPMs and from the
/// area ratio of box_b, both compared with true_semantic_ratio(b, box_b).
inline NoiseReport noise_benchmark(const std::vector<Sample>& samples,
                                   const MixConfig& mix,
                                   const ClassifierState& model, int trials,
                                   Rng& rng) {
  mix.validate();
  if (samples.size() < 2)
    throw std::invalid_argument("noise_benchmark: need at least two samples");
  if (trials < 1) throw std::invalid_argument("noise_benchmark: trials >= 1");
  for (const auto& s : samples)
    if (!s.semantic_mask)
      throw std::invalid_argument("noise_benchmark: samples need semantic masks");

  std::vector<std::optional<SemanticPercentMap>> cache(samples.size());
  auto spm = [&](std::size_t i) -> const SemanticPercentMap& {
    if (!cache[i]) cache[i] = image_spm(model, samples[i].image, samples[i].label);
    return *cache[i];
  };

  const int n = static_cast<int>(samples.size());
  double err_sem = 0.0, err_area = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int a = uniform_index(rng, n);
    const int k = uniform_index(rng, n - 1);
    const int b = k >= a ? k + 1 : k;
    const int w = samples[a].image.width(), h = samples[a].image.height();
    const BoxRegion box_a = sample_box(sample_lambda(mix.alpha, rng), w, h, rng);
    BoxRegion box_b = box_a;
    if (!mix.symmetric) box_b = sample_box(sample_lambda(mix.alpha, rng), w, h, rng);
    const double truth = true_semantic_ratio(samples[b], box_b);
    const double sem = semantic_ratio_labels(spm(a), box_a, spm(b), box_b).rho_b;
    const double area = area_ratio_labels(box_b).rho_b;
    err_sem += std::abs(sem - truth);
    err_area += std::abs(area - truth);
  }
  return {err_sem / trials, err_area / trials, trials};
}

}  // namespace snapmix
