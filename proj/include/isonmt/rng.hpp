// isonmt/rng.hpp

// Copyright 2026  isonmt authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Deterministic random sampling. std::mt19937_64 raw output is pinned by the
// standard, but the standard distributions are implementation-defined, so all
// sampling here is built directly on the raw engine output. Same seed, same
// call sequence, same values, on every platform.

#ifndef ISONMT_RNG_HPP_
#define ISONMT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "isonmt/common.hpp"

namespace isonmt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in the closed range [lo, hi], unbiased via rejection.
  long uniform_int(long lo, long hi) {
    if (lo > hi) throw Error("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (span == 0) return lo + static_cast<long>(next_u64());  // full 64-bit span
    const std::uint64_t reject_below = (0u - span) % span;  // 2^64 mod span
    std::uint64_t raw = next_u64();
    while (raw < reject_below) raw = next_u64();
    return lo + static_cast<long>(raw % span);
  }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  bool bernoulli(double p) { return uniform_real() < p; }

  /// Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    const double u2 = uniform_real();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle, deterministic in the engine state.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<long>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace isonmt

#endif  // ISONMT_RNG_HPP_
