// Copyright 2026 the petsig authors
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
#include <limits>
#include <random>

#include "petsig/mathutil.hpp"

namespace petsig {

// Deterministic draws on top of mt19937_64. Distribution shaping is done
// by hand so that streams are identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1).
  double open01() {
    const double u = next_double();
    return u > 0.0 ? u : 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  double normal() { return inv_normal_cdf(open01()); }

  /// Standard logistic variate.
  double logistic() {
    const double u = open01();
    return std::log(u) - std::log1p(-u);
  }

private:
  std::mt19937_64 eng_;
};

}  // namespace petsig
