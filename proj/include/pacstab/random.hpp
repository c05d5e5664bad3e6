/*
 * Copyright 2026 The pacstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Portable random number generation.
//
// Every random quantity in the toolkit (subset indices, synthetic data,
// initial weights, noise) is drawn through the generators in this header so
// that results can be reproduced bit-for-bit from another language. The
// algorithms are fixed and documented in README.md:
//
//   * SplitMix64 expands a 64-bit seed into generator state.
//   * xoshiro256** produces the raw 64-bit stream.
//   * Bounded integers use rejection on the low end (no modulo bias).
//   * Uniform doubles take the top 53 bits.
//   * Standard normals use the Box-Muller transform, both outputs consumed.
//
// std::normal_distribution and friends are deliberately not used because their
// output is implementation-defined.

#ifndef PACSTAB_RANDOM_HPP_
#define PACSTAB_RANDOM_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace pacstab {

// SplitMix64 output function (Steele, Lea and Flood).
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a over the bytes of `text`.
constexpr std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : text) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Order-sensitive combination of 64-bit words:
//   h = 0x6a09e667f3bcc909; for each w: h = Mix64(h ^ w) + 0x9e3779b97f4a7c15
constexpr std::uint64_t Hash64(std::span<const std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) h = Mix64(h ^ w) + 0x9e3779b97f4a7c15ULL;
  return h;
}

constexpr std::uint64_t Hash64(std::initializer_list<std::uint64_t> words) {
  return Hash64(std::span<const std::uint64_t>(words.begin(), words.size()));
}

// xoshiro256** 1.0 (Blackman and Vigna), seeded through SplitMix64.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t Below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform();

  // Standard normal variate.
  double Gaussian();

 private:
  std::array<std::uint64_t, 4> state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace pacstab

#endif  // PACSTAB_RANDOM_HPP_
