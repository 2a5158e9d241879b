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

// Checkpoint container:
//
//   "SNAPMIX-CKPT v1\n"
//   uint64 little-endian header length N
//   N bytes of JSON header: architecture, epoch, rng states and a tensor
//   table {name, shape, offset, count} (offsets in doubles)
//   raw IEEE-754 little-endian doubles
//
// Tensors are stored bit-for-bit, so save/load is an exact round trip.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapmix/model.hpp"

namespace snapmix {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[] = "SNAPMIX-CKPT v1\n";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ClassifierState model;
  std::vector<double> velocity;  // empty when no optimizer state was saved
  int epoch = 0;
  std::map<std::string, std::string> rng_states;
};

inline nlohmann::ordered_json model_config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["in_channels"] = c.in_channels;
  j["input_size"] = c.input_size;
  j["num_classes"] = c.num_classes;
  j["channels"] = c.channels;
  j["downsample"] = c.downsample;
  j["kernel"] = c.kernel;
  j["pool"] = c.pool == PoolKind::max ? "max" : "avg";
  j["mid_branch"] = c.mid_branch;
  j["mid_channels"] = c.mid_channels;
  j["fusion"] = c.fusion == Fusion::sum ? "sum" : "softmax_avg";
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.input_size = j.at("input_size").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.downsample = j.at("downsample").get<std::vector<int>>();
  c.kernel = j.at("kernel").get<int>();
  c.pool = j.at("pool").get<std::string>() == "max" ? PoolKind::max : PoolKind::avg;
  c.mid_branch = j.at("mid_branch").get<bool>();
  c.mid_channels = j.at("mid_channels").get<int>();
  c.fusion = j.at("fusion").get<std::string>() == "sum" ? Fusion::sum
                                                        : Fusion::softmax_avg;
  return c;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& params = ck.model.params();
  nlohmann::ordered_json header;
  header["format"] = 1;
  header["model"] = model_config_json(ck.model.config());
  header["epoch"] = ck.epoch;
  header["rng"] = ck.rng_states;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& s : ck.model.layout().slots) {
    tensors.push_back({{"name", s.name},
                       {"shape", s.shape},
                       {"offset", s.offset},
                       {"count", s.count}});
  }
  if (!ck.velocity.empty()) {
    if (ck.velocity.size() != params.size())
      throw CheckpointError("checkpoint: velocity size mismatch");
    tensors.push_back({{"name", "optimizer.velocity"},
                       {"shape", {static_cast<int>(params.size())}},
                       {"offset", params.size()},
                       {"count", params.size()}});
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();
  const std::uint64_t n = text.size();

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!ck.velocity.empty())
    out.write(reinterpret_cast<const char*>(ck.velocity.data()),
              static_cast<std::streamsize>(ck.velocity.size() * sizeof(double)));
  if (!out) throw CheckpointError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("checkpoint: bad magic");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n > (1u << 26)) throw CheckpointError("checkpoint: bad header length");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ck;
  ModelConfig mc;
  try {
    mc = model_config_from_json(header.at("model"));
    ck.model = ClassifierState(mc);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad architecture: ") + e.what());
  }
  ck.epoch = header.at("epoch").get<int>();
  ck.rng_states = header.at("rng").get<std::map<std::string, std::string>>();

  // The tensor table must match the layout implied by the architecture.
  const auto& slots = ck.model.layout().slots;
  const auto& tensors = header.at("tensors");
  bool has_velocity = false;
  std::size_t i = 0;
  for (const auto& t : tensors) {
    const std::string name = t.at("name").get<std::string>();
    if (name == "optimizer.velocity") {
      has_velocity = true;
      continue;
    }
    if (i >= slots.size() || slots[i].name != name ||
        slots[i].shape != t.at("shape").get<std::vector<int>>() ||
        slots[i].offset != t.at("offset").get<std::size_t>()) {
      throw CheckpointError("checkpoint: tensor table does not match architecture at '" +
                            name + "'");
    }
    ++i;
  }
  if (i != slots.size()) throw CheckpointError("checkpoint: missing tensors");

  auto& params = ck.model.params();
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint: truncated parameter data");
  if (has_velocity) {
    ck.velocity.resize(params.size());
    in.read(reinterpret_cast<char*>(ck.velocity.data()),
            static_cast<std::streamsize>(ck.velocity.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint: truncated optimizer state");
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path);
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace snapmix
