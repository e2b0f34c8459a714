// Copyright (c) 2026 The vdp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace vdp {

// mt19937_64 with explicit distribution code. The standard pins the engine's
// output sequence but not the library distributions, so uniform/normal/poisson
// are implemented here to keep streams reproducible everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal, Box-Muller with a cached spare.
  double normal();

  // Poisson draw by Knuth's product method; intended for rates up to a few
  // hundred (image intensity scale).
  int64_t poisson(double rate);

  // Derives an independent substream seed; splitmix64 finalizer.
  static uint64_t mix(uint64_t seed, uint64_t stream);

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vdp
