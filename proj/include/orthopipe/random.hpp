// Copyright (c) 2026 The orthopipe Authors. All rights reserved.
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

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace orthopipe
{

/// SplitMix64 finalizer; used to derive independent stream seeds from tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept
{
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) {
    h = mix64(h ^ p);
  }
  return h;
}

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the variate transforms below are written
// out so that results do not depend on the standard library's distributions.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
  {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
      return static_cast<std::int64_t>(engine_());
    }
    // Reject the tail so the modulo is unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one variate per call).
  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson by Knuth's multiplication method; intended for small means.
  int poisson(double mean)
  {
    if (mean <= 0.0) {
      return 0;
    }
    const double limit = std::exp(-mean);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace orthopipe
