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

// Experiment configuration in a flat `key = value` text format:
//
//   # comment
//   mix.strategy = snapmix
//   train.lr_decay_epochs = 24,48
//
// Every key has a default; unknown keys are rejected by name. The canonical
// form lists every key, sorted, one per line, and is what gets hashed and
// snapshotted into run directories.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "snapmix/datagen.hpp"
#include "snapmix/mix.hpp"
#include "snapmix/model.hpp"
#include "snapmix/random.hpp"

namespace snapmix {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DataSource { synthetic, folder };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSpec synthetic;
  std::string path;
  int resize = 512;
  int crop = 448;
  /// "auto" flips folder data only; synthetic cues are not mirror-invariant.
  std::string flip = "auto";

  bool flip_enabled() const {
    if (flip == "auto") return source == DataSource::folder;
    return flip == "true";
  }
};

/// Architecture knobs that do not depend on the data.
struct ModelOptions {
  std::vector<int> channels{8, 16, 32};
  std::vector<int> downsample{1, 1, 0};
  int kernel = 3;
  PoolKind pool = PoolKind::max;
  bool mid_branch = false;
  int mid_channels = 16;
  Fusion fusion = Fusion::sum;
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double lr = 0.01;
  std::vector<int> lr_decay_epochs{24, 48};
  double lr_decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<int> seeds{0, 1, 2};
  int eval_every = 1;
  int final_k = 10;
};

struct ExperimentConfig {
  DataConfig data;
  ModelOptions model;
  MixConfig mix;
  TrainConfig train;

  void validate() const {
    if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (train.seeds.empty()) throw ConfigError("train.seeds must be nonempty");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (train.eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (train.final_k < 1) throw ConfigError("train.final_k must be >= 1");
    if (!(train.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
    try {
      mix.validate();
      if (data.source == DataSource::synthetic) data.synthetic.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (data.source == DataSource::folder && data.path.empty())
      throw ConfigError("data.path is required for data.source = folder");
    if (data.flip != "auto" && data.flip != "true" && data.flip != "false")
      throw ConfigError("data.flip must be auto, true or false");
  }
};

/// Learning rate in effect during `epoch` (0-based): base rate times
/// factor^(number of decay boundaries <= epoch).
inline double lr_at_epoch(const TrainConfig& t, int epoch) {
  double lr = t.lr;
  for (int b : t.lr_decay_epochs)
    if (epoch >= b) lr *= t.lr_decay_factor;
  return lr;
}

namespace config_detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      s + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      s + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    s + "'");
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<int> parse_int_list(const std::string& key,
                                       const std::string& s) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(parse_int(key, trim(item))));
  return out;
}

inline std::string fmt_int_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

struct KeySpec {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& key,
                     const std::string& value)>
      set;
};

inline const std::map<std::string, KeySpec>& key_table() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    auto dbl = [&t](const char* name, auto ref) {
      t[name] = {[ref](const C& c) { return fmt_double(ref(const_cast<C&>(c))); },
                 [ref](C& c, const S& k, const S& v) { ref(c) = parse_double(k, v); }};
    };
    auto integer = [&t](const char* name, auto ref) {
      t[name] = {[ref](const C& c) { return std::to_string(ref(const_cast<C&>(c))); },
                 [ref](C& c, const S& k, const S& v) {
                   ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(
                       parse_int(k, v));
                 }};
    };
    auto boolean = [&t](const char* name, auto ref) {
      t[name] = {[ref](const C& c) { return S(ref(const_cast<C&>(c)) ? "true" : "false"); },
                 [ref](C& c, const S& k, const S& v) { ref(c) = parse_bool(k, v); }};
    };
    auto list = [&t](const char* name, auto ref) {
      t[name] = {[ref](const C& c) { return fmt_int_list(ref(const_cast<C&>(c))); },
                 [ref](C& c, const S& k, const S& v) { ref(c) = parse_int_list(k, v); }};
    };
    auto text = [&t](const char* name, auto ref) {
      t[name] = {[ref](const C& c) { return ref(const_cast<C&>(c)); },
                 [ref](C& c, const S&, const S& v) { ref(c) = v; }};
    };

    t["data.source"] = {
        [](const C& c) {
          return S(c.data.source == DataSource::synthetic ? "synthetic" : "folder");
        },
        [](C& c, const S& k, const S& v) {
          if (v == "synthetic") c.data.source = DataSource::synthetic;
          else if (v == "folder") c.data.source = DataSource::folder;
          else throw ConfigError("config key '" + k + "': expected synthetic or folder");
        }};
    text("data.path", [](C& c) -> S& { return c.data.path; });
    text("data.flip", [](C& c) -> S& { return c.data.flip; });
    integer("data.resize", [](C& c) -> int& { return c.data.resize; });
    integer("data.crop", [](C& c) -> int& { return c.data.crop; });
    integer("data.num_classes", [](C& c) -> int& { return c.data.synthetic.num_classes; });
    integer("data.image_size", [](C& c) -> int& { return c.data.synthetic.image_size; });
    integer("data.channels", [](C& c) -> int& { return c.data.synthetic.channels; });
    integer("data.cue_size", [](C& c) -> int& { return c.data.synthetic.cue_size; });
    integer("data.background_alphabet",
            [](C& c) -> int& { return c.data.synthetic.background_alphabet; });
    dbl("data.noise_std", [](C& c) -> double& { return c.data.synthetic.noise_std; });
    integer("data.samples_per_class",
            [](C& c) -> int& { return c.data.synthetic.samples_per_class; });
    integer("data.seed", [](C& c) -> std::uint64_t& { return c.data.synthetic.seed; });

    list("model.channels", [](C& c) -> std::vector<int>& { return c.model.channels; });
    list("model.downsample", [](C& c) -> std::vector<int>& { return c.model.downsample; });
    integer("model.kernel", [](C& c) -> int& { return c.model.kernel; });
    t["model.pool"] = {
        [](const C& c) { return S(c.model.pool == PoolKind::max ? "max" : "avg"); },
        [](C& c, const S& k, const S& v) {
          if (v == "max") c.model.pool = PoolKind::max;
          else if (v == "avg") c.model.pool = PoolKind::avg;
          else throw ConfigError("config key '" + k + "': expected max or avg");
        }};
    boolean("model.mid_branch", [](C& c) -> bool& { return c.model.mid_branch; });
    integer("model.mid_channels", [](C& c) -> int& { return c.model.mid_channels; });
    t["model.fusion"] = {
        [](const C& c) { return S(c.model.fusion == Fusion::sum ? "sum" : "softmax_avg"); },
        [](C& c, const S& k, const S& v) {
          if (v == "sum") c.model.fusion = Fusion::sum;
          else if (v == "softmax_avg") c.model.fusion = Fusion::softmax_avg;
          else throw ConfigError("config key '" + k + "': expected sum or softmax_avg");
        }};

    t["mix.strategy"] = {
        [](const C& c) { return S(to_string(c.mix.strategy)); },
        [](C& c, const S& k, const S& v) {
          try {
            c.mix.strategy = parse_mix_strategy(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError("config key '" + k + "': " + e.what());
          }
        }};
    t["mix.label_strategy"] = {
        [](const C& c) { return S(to_string(c.mix.label_strategy)); },
        [](C& c, const S& k, const S& v) {
          try {
            c.mix.label_strategy = parse_label_strategy(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError("config key '" + k + "': " + e.what());
          }
        }};
    dbl("mix.alpha", [](C& c) -> double& { return c.mix.alpha; });
    dbl("mix.switch_prob", [](C& c) -> double& { return c.mix.switch_prob; });
    boolean("mix.symmetric", [](C& c) -> bool& { return c.mix.symmetric; });

    integer("train.epochs", [](C& c) -> int& { return c.train.epochs; });
    integer("train.batch_size", [](C& c) -> int& { return c.train.batch_size; });
    dbl("train.lr", [](C& c) -> double& { return c.train.lr; });
    list("train.lr_decay_epochs",
         [](C& c) -> std::vector<int>& { return c.train.lr_decay_epochs; });
    dbl("train.lr_decay_factor", [](C& c) -> double& { return c.train.lr_decay_factor; });
    dbl("train.momentum", [](C& c) -> double& { return c.train.momentum; });
    dbl("train.weight_decay", [](C& c) -> double& { return c.train.weight_decay; });
    list("train.seeds", [](C& c) -> std::vector<int>& { return c.train.seeds; });
    integer("train.eval_every", [](C& c) -> int& { return c.train.eval_every; });
    integer("train.final_k", [](C& c) -> int& { return c.train.final_k; });
    return t;
  }();
  return table;
}

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : config_detail::key_table()) keys.push_back(k);
  return keys;
}

/// Applies one `key=value` assignment.
inline void set_config_value(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  const auto& table = config_detail::key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

inline std::string get_config_value(const ExperimentConfig& cfg,
                                    const std::string& key) {
  const auto& table = config_detail::key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(cfg);
}

/// Parses `key=value` (used for command-line overrides).
inline void apply_override(ExperimentConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + kv + "' is not of the form key=value");
  set_config_value(cfg, config_detail::trim(kv.substr(0, eq)),
                   config_detail::trim(kv.substr(eq + 1)));
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = config_detail::trim(t.substr(0, eq));
    if (seen.count(key))
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    seen[key] = lineno;
    set_config_value(cfg, key, config_detail::trim(t.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

/// Every key, sorted, `key = value` per line.
inline std::string canonical_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, spec] : config_detail::key_table())
    out += k + " = " + spec.get(cfg) + "\n";
  return out;
}

/// 16 hex digits of FNV-1a over the canonical serialization.
inline std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

}  // namespace snapmix
