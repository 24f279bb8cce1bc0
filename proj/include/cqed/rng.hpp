// Copyright 2026 The cqed-pairs Authors
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

// Random streams for trajectory ensembles.
//
// Child seeds are derived, never drawn: child(parent, k) is the SplitMix64
// finalizer applied to parent + golden * (k + 1). A trajectory's seed is
// child(child(point_seed, setting), trajectory_index), so every trajectory
// owns an independent mt19937_64 stream whose identity depends only on its
// logical position, not on the worker that runs it.
//
// Each trajectory stream is itself SplitMix64: draw j is
// finalize(seed + golden * j) for j = 1, 2, ..., i.e. a counter-based
// generator with the same finalizer.

#include <bit>
#include <cstdint>
#include <initializer_list>

namespace cqed {

inline constexpr std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t child_seed(std::uint64_t parent, std::uint64_t k) {
  return splitmix64_finalize(parent + 0x9E3779B97F4A7C15ULL * (k + 1));
}

/// Seed keyed by a list of doubles (bit patterns), e.g. a parameter point.
inline std::uint64_t hash_values(std::uint64_t seed, std::initializer_list<double> values) {
  std::uint64_t h = splitmix64_finalize(seed);
  for (double v : values) h = child_seed(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Uniform on [0, 1) with 53 random bits; identical across platforms.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t next() {
    state_ += kGolden;
    return splitmix64_finalize(state_);
  }

  // UniformRandomBitGenerator interface, for <random> distributions.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next(); }

 private:
  std::uint64_t state_;
};

}  // namespace cqed
