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

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace snapmix {

using Rng = std::mt19937_64;

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent named stream derived from a root seed. Streams with
/// different names never share state, so e.g. drawing extra preview boxes
/// does not shift the "init" or "data" streams of a training run.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  return Rng(splitmix64(seed ^ splitmix64(fnv1a64(name))));
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) {
    throw std::invalid_argument("restore_rng_state: malformed state");
  }
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

/// One draw from the symmetric Beta(alpha, alpha) distribution, built from
/// two Gamma(alpha, 1) variates.
inline double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("sample_lambda: alpha must be > 0");
  }
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  const double s = x + y;
  if (s <= 0.0) return 0.5;  // both gammas underflowed (tiny alpha)
  return x / s;
}

}  // namespace snapmix
