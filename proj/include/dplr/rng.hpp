// Copyright 2026 The dplr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace dplr {

// Deterministic random source used by every sampling routine in the toolkit.
//
// Generator contract (documented so reproducibility claims are checkable):
//   * The engine is std::mt19937_64, whose word sequence is pinned by the
//     C++ standard, so a given (seed, stream) pair yields the same 64-bit
//     outputs on every conforming implementation.
//   * The engine seed for (seed, stream) is the stream-th output of a
//     SplitMix64 sequence started at finalize(seed); distinct stream ids
//     give unrelated engine states even for adjacent seeds, and streams
//     never share state.
//   * uniform01() maps the top 53 bits of one word to (0, 1).
//   * normal() is the Box-Muller transform: two words per pair of draws,
//     second draw cached. No rejection step, so stream consumption is a
//     fixed function of the number of draws (the cache is part of the
//     copyable state).
// Word streams are bit-identical everywhere; derived doubles can differ
// across platforms only in the last ulp of the libm calls involved.
class RngState {
 public:
  explicit RngState(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(derive_engine_seed(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform draw in the open interval (0, 1); never returns an endpoint.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  // Unbiased integer in [0, bound). Rejection from the biased top range;
  // the number of words consumed depends on the draws but is still a pure
  // function of the stream.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) {
      throw std::invalid_argument("uniform_below: bound must be positive");
    }
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t word = next_u64();
    while (word >= limit) {
      word = next_u64();
    }
    return word % bound;
  }

 private:
  static constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t derive_engine_seed(std::uint64_t seed,
                                                    std::uint64_t stream) {
    return splitmix_finalize(splitmix_finalize(seed) +
                             stream * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// k independent draws from N(0, 1); advances rng by exactly ceil(k/2)
// Box-Muller pairs (minus whatever the cache already held).
inline std::vector<double> sample_standard_normal(RngState& rng, int k) {
  if (k < 1) {
    throw std::invalid_argument(
        "sample_standard_normal: dimension must be at least 1");
  }
  std::vector<double> draws(static_cast<std::size_t>(k));
  for (double& value : draws) {
    value = rng.normal();
  }
  return draws;
}

}  // namespace dplr
