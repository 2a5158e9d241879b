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

// snapmix_cli: training, evaluation, augmentation previews, the label-noise
// benchmark, alpha sweeps and the mixing ablation grid.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "snapmix/snapmix.hpp"

namespace {

using namespace snapmix;

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

/// Raised for invalid combinations of otherwise well-formed arguments.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> seed;
  std::string out;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--override", c.overrides, "key=value, applied after the file")
      ->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "run seed (default: train.seeds)");
  cmd->add_option("--out", c.out, "output root (default: $SNAPMIX_OUT_ROOT or ./runs)");
  cmd->add_flag("--force", c.force, "overwrite existing artifacts");
  cmd->add_flag("-q,--quiet", c.quiet, "suppress progress messages");
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  for (const auto& kv : c.overrides) apply_override(cfg, kv);
  cfg.validate();
  return cfg;
}

fs::path out_root(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("SNAPMIX_OUT_ROOT"); env && *env) return env;
  return "runs";
}

LogFn logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& m) { std::cerr << m << "\n"; };
}

std::vector<int> seeds_of(const Common& c, const ExperimentConfig& cfg) {
  return c.seed ? std::vector<int>{*c.seed} : cfg.train.seeds;
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve_config(c);
  const LogFn log = logger(c);
  const Dataset ds = load_dataset(cfg, log);
  bool failed = false;
  for (int seed : seeds_of(c, cfg)) {
    RunOptions ro;
    ro.out_dir = out_root(c) / (config_hash(cfg) + "-seed" + std::to_string(seed));
    ro.force = c.force;
    ro.log = log;
    ro.dataset = &ds;
    const RunOutcome o = run_experiment(cfg, seed, ro);
    std::cout << ro.out_dir->string() << "\n";
    if (o.report.failed) {
      std::cerr << "error: " << o.report.message << "\n";
      failed = true;
    } else if (log) {
      std::ostringstream m;
      m << "seed " << seed << ": final-k acc " << o.report.mean_final_k_acc
        << " best " << o.report.best_acc;
      log(m.str());
    }
  }
  return failed ? kRuntimeError : kOk;
}

/// Loads a checkpoint and checks it against the architecture implied by the
/// config and dataset, naming the first disagreement.
ClassifierState checked_model(const std::string& path, const ExperimentConfig& cfg,
                              const Dataset& ds) {
  const Checkpoint ck = load_checkpoint(path);
  const ModelConfig want = model_config_for(cfg, ds);
  const ModelConfig& got = ck.model.config();
  if (got == want) return ck.model;
  std::ostringstream m;
  m << "checkpoint '" << path << "' does not fit the configured data/model: ";
  const auto have = model_config_json(got), need = model_config_json(want);
  for (auto it = need.begin(); it != need.end(); ++it) {
    if (!have.contains(it.key()) || have.at(it.key()) != it.value()) {
      m << it.key() << " is " << (have.contains(it.key()) ? have.at(it.key()).dump() : "absent")
        << " in the checkpoint but " << it.value().dump() << " is required";
      break;
    }
  }
  throw std::runtime_error(m.str());
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const ExperimentConfig cfg = resolve_config(c);
  const Dataset ds = load_dataset(cfg, logger(c));
  const ClassifierState model = checked_model(checkpoint, cfg, ds);
  nlohmann::ordered_json j;
  j["checkpoint"] = checkpoint;
  j["config_hash"] = config_hash(cfg);
  j["train_acc"] = accuracy_percent(model, ds.train, cfg.data);
  j["test_acc"] = accuracy_percent(model, ds.test, cfg.data);
  j["test_samples"] = ds.test.size();
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_preview(const Common& c, const std::string& checkpoint, int count,
                const std::string& strategy) {
  if (count < 1) throw UsageError("--count must be >= 1");
  ExperimentConfig cfg = resolve_config(c);
  if (!strategy.empty()) set_config_value(cfg, "mix.strategy", strategy);
  cfg.validate();
  const Dataset ds = load_dataset(cfg, logger(c));
  const ClassifierState model = checked_model(checkpoint, cfg, ds);
  const std::vector<Sample>& pool = ds.test.size() >= 2 ? ds.test : ds.train;
  if (pool.size() < 2) throw std::runtime_error("preview: need at least two samples");

  const fs::path dir = out_root(c) / "preview";
  prepare_run_dir(dir, c.force);
  const int seed = c.seed.value_or(cfg.train.seeds.front());
  Rng pick = substream(std::uint64_t(seed), "preview");
  Rng boxes = substream(std::uint64_t(seed), "preview-boxes");
  MixConfig mix = cfg.mix;
  mix.switch_prob = 1.0;

  for (int i = 0; i < count; ++i) {
    const int n = static_cast<int>(pool.size());
    const int a = uniform_index(pick, n);
    const int k = uniform_index(pick, n - 1);
    const int b = k >= a ? k + 1 : k;
    const std::vector<Image> images = {eval_view(pool[a], cfg.data), eval_view(pool[b], cfg.data)};
    const std::vector<int> labels = {pool[a].label, pool[b].label};
    const auto spms = batch_spms(model, images, labels);
    const auto mixed = apply_mix(
        images, labels, [&](std::size_t j) -> const SemanticPercentMap& { return spms[j]; },
        mix, boxes);
    const MixResult& m = mixed[0];
    const PreviewPanel p = render_preview(images[0], images[1], m, mix, spms[0], spms[1]);
    const std::string stem = panel_filename(i, m);
    save_png(dir / (stem + ".png"), p.panel);
    std::ofstream(dir / (stem + ".json")) << p.sidecar.dump(2) << "\n";
    std::cout << (dir / (stem + ".png")).string() << "\n";
  }
  return kOk;
}

int cmd_noise_bench(const Common& c, const std::string& checkpoint, int trials) {
  if (trials < 1) throw UsageError("--trials must be >= 1");
  const ExperimentConfig cfg = resolve_config(c);
  const LogFn log = logger(c);
  const Dataset ds = load_dataset(cfg, log);
  const int seed = c.seed.value_or(cfg.train.seeds.front());
  ClassifierState model;
  if (!checkpoint.empty()) {
    model = checked_model(checkpoint, cfg, ds);
  } else {
    if (log) log("no checkpoint given; training one under seed " + std::to_string(seed));
    RunOptions ro;
    ro.dataset = &ds;
    RunOutcome o = run_experiment(cfg, seed, ro);
    if (o.report.failed) throw std::runtime_error(o.report.message);
    model = std::move(o.model);
  }
  const std::vector<Sample>& pool = ds.test.size() >= 2 ? ds.test : ds.train;
  Rng rng = substream(std::uint64_t(seed), "noise");
  const NoiseReport r = noise_benchmark(pool, cfg.mix, model, trials, rng);

  const fs::path dir = out_root(c) / "noise";
  prepare_run_dir(dir, c.force);
  char line[160];
  std::snprintf(line, sizeof(line), "%.9f,%.9f,%d\n", r.mae_semantic, r.mae_area, r.trials);
  write_file_atomic(dir / "noise.csv", std::string("mae_semantic,mae_area,trials\n") + line);
  std::snprintf(line, sizeof(line), "mae_semantic  %.6f\nmae_area      %.6f\ntrials        %d\n",
                r.mae_semantic, r.mae_area, r.trials);
  write_file_atomic(dir / "noise.txt", line);
  std::cout << line;
  return kOk;
}

TableOptions table_options(const Common& c, const std::string& sub) {
  TableOptions opt;
  opt.out_dir = out_root(c) / sub;
  opt.force = c.force;
  opt.log = logger(c);
  return opt;
}

ExperimentConfig table_config(const Common& c) {
  ExperimentConfig cfg = resolve_config(c);
  if (c.seed) cfg.train.seeds = {*c.seed};
  return cfg;
}

int cmd_sweep(const Common& c, const std::vector<double>& alphas) {
  const ExperimentConfig cfg = table_config(c);
  const TableOptions opt = table_options(c, "sweep");
  prepare_run_dir(*opt.out_dir, c.force);
  const auto rows = alpha_sweep(cfg, alphas, opt);
  std::cout << table_text(rows);
  return kOk;
}

int cmd_ablation(const Common& c, bool with_mixup) {
  const ExperimentConfig cfg = table_config(c);
  const TableOptions opt = table_options(c, "ablation");
  prepare_run_dir(*opt.out_dir, c.force);
  const auto rows = ablation_grid(cfg, with_mixup, opt);
  std::cout << table_text(rows);
  return kOk;
}

/// Writes the configured dataset as PNG files (plus cue masks for synthetic
/// data) and a JSONL manifest.
int cmd_export_data(const Common& c) {
  const ExperimentConfig cfg = resolve_config(c);
  const Dataset ds = load_dataset(cfg, logger(c));
  const fs::path dir = out_root(c) / "data";
  prepare_run_dir(dir, c.force);
  Manifest m = manifest_of(ds);
  std::size_t r = 0;
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const Sample& s : *split) {
      ManifestRecord& rec = m.records[r++];
      const fs::path rel = fs::path(rec.split) / rec.class_name /
                           (rec.id.substr(rec.id.find('/') + 1) + ".png");
      fs::create_directories((dir / rel).parent_path());
      save_png(dir / rel, s.image);
      rec.path = rel.string();
      if (s.semantic_mask) {
        Image mask(1, s.semantic_mask->height, s.semantic_mask->width, 0.0);
        for (int y = 0; y < mask.height(); ++y)
          for (int x = 0; x < mask.width(); ++x)
            mask.at(0, y, x) = s.semantic_mask->at(y, x) ? 1.0 : 0.0;
        const fs::path mrel = fs::path(rel).replace_extension(".mask.png");
        save_png(dir / mrel, mask);
        rec.mask = mrel.string();
      }
    }
  }
  write_file_atomic(dir / "manifest.jsonl", manifest_text(m));
  std::cout << (dir / "manifest.jsonl").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SnapMix-style mixing augmentation experiments"};
  app.require_subcommand(1);
  Common common;
  std::string checkpoint, strategy;
  int count = 4, trials = 1000;
  bool with_mixup = false;
  std::vector<double> alphas = {0.2, 0.5, 1.0, 3.0, 5.0, 7.0, 8.0};

  auto* train = app.add_subcommand("train", "train one model per seed and persist run artifacts");
  add_common(train, common, true);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured data");
  add_common(eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin to evaluate")->required();

  auto* preview = app.add_subcommand("preview", "render mixed samples with SPM overlays");
  add_common(preview, common, false);
  preview->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  preview->add_option("--count", count, "number of panels");
  preview->add_option("--strategy", strategy, "mixing strategy (default: mix.strategy)");

  auto* noise = app.add_subcommand("noise-bench", "label-noise benchmark of area vs semantic ratios");
  add_common(noise, common, false);
  noise->add_option("--checkpoint", checkpoint, "trained checkpoint (default: train one)");
  noise->add_option("--trials", trials, "number of mixed pairs");

  auto* sweep = app.add_subcommand("sweep", "multi-seed accuracy over mixing alpha values");
  add_common(sweep, common, false);
  sweep->add_option("--alphas", alphas, "alpha values")->delimiter(',');

  auto* ablation = app.add_subcommand("ablation", "symmetric/asymmetric x area/semantic label grid");
  add_common(ablation, common, false);
  ablation->add_flag("--with-mixup", with_mixup, "append a MixUp row");

  auto* export_data = app.add_subcommand("export-data", "write the configured dataset as PNGs and a manifest");
  add_common(export_data, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train) return cmd_train(common);
    if (*eval) return cmd_eval(common, checkpoint);
    if (*preview) return cmd_preview(common, checkpoint, count, strategy);
    if (*noise) return cmd_noise_bench(common, checkpoint, trials);
    if (*sweep) return cmd_sweep(common, alphas);
    if (*ablation) return cmd_ablation(common, with_mixup);
    if (*export_data) return cmd_export_data(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ArtifactExists& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
