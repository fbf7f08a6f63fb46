// Copyright 2026 The emoadapt Authors
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

// Deterministic random number generation.
//
// Every stochastic choice in the library (parameter init, dropout masks,
// shuffling, synthetic data) flows through Rng so that a run is a pure
// function of its seeds on any platform.  The generator is xoshiro256**
// seeded through SplitMix64; normals use Box-Muller.  We roll these few
// dozen lines ourselves instead of using <random> because the standard
// distributions (std::normal_distribution, std::shuffle with
// uniform_int_distribution) are not bit-reproducible across standard
// library implementations, and cross-machine reproducibility is a
// contract of this library.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace emoadapt {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// xoshiro256** by Blackman & Vigna (public domain reference implementation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller.  Draws two uniforms per call and
  // discards the sine branch, keeping consumption deterministic per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]: keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

// Derives an independent stream seed from a root seed, a purpose tag and an
// index (e.g. epoch or step number).  Keying dropout by step and shuffling
// by epoch makes mid-run checkpoint resume bit-exact: the stream for any
// future step never depends on how many draws earlier steps consumed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t index) {
  // FNV-1a over the tag, then SplitMix64 whitening of the combination.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = root;
  std::uint64_t mixed = detail::splitmix64(x) ^ h;
  mixed ^= detail::splitmix64(x) ^ (index * 0x9e3779b97f4a7c15ULL);
  std::uint64_t y = mixed;
  return detail::splitmix64(y);
}

}  // namespace emoadapt
