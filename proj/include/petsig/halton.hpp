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

// Halton draws for simulated likelihoods. One prime base per dimension, a
// short burn-in, and optional digit scrambling by a per-dimension
// permutation that fixes zero so values stay inside (0, 1).

#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "petsig/rng.hpp"

namespace petsig {

inline constexpr std::size_t kHaltonBurnIn = 10;

inline std::vector<unsigned> first_primes(std::size_t count) {
  std::vector<unsigned> primes;
  primes.reserve(count);
  for (unsigned candidate = 2; primes.size() < count; ++candidate) {
    bool divisible = false;
    for (const unsigned p : primes) {
      if (p * p > candidate) {
        break;
      }
      if (candidate % p == 0) {
        divisible = true;
        break;
      }
    }
    if (!divisible) {
      primes.push_back(candidate);
    }
  }
  return primes;
}

namespace detail {

/// Digit permutation for one base. Zero is a fixed point, the other digits
/// are shuffled; seed 0 yields the identity (plain Halton).
inline std::vector<unsigned> digit_permutation(unsigned base,
                                               std::uint64_t seed) {
  std::vector<unsigned> perm(base);
  std::iota(perm.begin(), perm.end(), 0U);
  if (seed == 0) {
    return perm;
  }
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + base);
  for (std::size_t i = base - 1; i > 1; --i) {
    const std::size_t j = 1 + static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

inline double radical_inverse(std::uint64_t index, unsigned base,
                              const std::vector<unsigned>& perm) {
  const double inv = 1.0 / base;
  double scale = inv;
  double value = 0.0;
  while (index > 0) {
    value += perm[index % base] * scale;
    index /= base;
    scale *= inv;
  }
  return value;
}

}  // namespace detail

/// n points in (0,1)^dim. Point k of dimension d is the (scrambled) base-p_d
/// radical inverse at index k + burn-in + 1, so the first ten Halton points
/// are never used. Deterministic in (dim, n, seed); seed 0 is unscrambled.
inline std::vector<std::vector<double>> halton_sequence(std::size_t dim,
                                                        std::size_t n,
                                                        std::uint64_t seed) {
  if (dim < 1 || n < 1) {
    throw std::invalid_argument("halton_sequence needs dim >= 1 and n >= 1");
  }
  const std::vector<unsigned> bases = first_primes(dim);
  std::vector<std::vector<unsigned>> perms;
  perms.reserve(dim);
  for (const unsigned base : bases) {
    perms.push_back(detail::digit_permutation(base, seed));
  }
  std::vector<std::vector<double>> points(n, std::vector<double>(dim));
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t index = static_cast<std::uint64_t>(k) + kHaltonBurnIn + 1;
    for (std::size_t d = 0; d < dim; ++d) {
      points[k][d] = detail::radical_inverse(index, bases[d], perms[d]);
    }
  }
  return points;
}

}  // namespace petsig
