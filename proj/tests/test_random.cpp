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

#include <bit>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "pacstab/error.hpp"
#include "pacstab/random.hpp"

namespace pacstab {
namespace {

// Straight transcription of the public-domain reference generators.
std::uint64_t RefSplitMix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RefXoshiro {
  std::uint64_t s[4];
  std::uint64_t Next() {
    const std::uint64_t result = std::rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = std::rotl(s[3], 45);
    return result;
  }
};

TEST(SplitMix64, PublishedVector) {
  // Reference outputs of SplitMix64 for seed 1234567.
  std::uint64_t x = 1234567;
  EXPECT_EQ(RefSplitMix64(x), 6457827717110365317ULL);
  EXPECT_EQ(RefSplitMix64(x), 3203168211198807973ULL);
  EXPECT_EQ(Mix64(1234567 + 0x9e3779b97f4a7c15ULL), 6457827717110365317ULL);
}

TEST(Xoshiro, PublishedVectorForSmallState) {
  RefXoshiro ref{{1, 2, 3, 4}};
  EXPECT_EQ(ref.Next(), 11520ULL);
  EXPECT_EQ(ref.Next(), 0ULL);
  EXPECT_EQ(ref.Next(), 1509978240ULL);
  EXPECT_EQ(ref.Next(), 1215971899390074240ULL);
}

TEST(Rng, MatchesReferenceStream) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, ~0ULL}) {
    std::uint64_t x = seed;
    RefXoshiro ref{};
    for (auto& w : ref.s) w = RefSplitMix64(x);
    Rng rng(seed);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(rng(), ref.Next()) << "seed " << seed;
  }
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(Rng, BelowIsUnbiasedAndInRange) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.Below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 450);
  EXPECT_EQ(Rng(3).Below(1), 0u);
  EXPECT_THROW(Rng(3).Below(0), InvalidArgument);
}

TEST(Rng, GaussianMoments) {
  Rng rng(11);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.Gaussian();
    s1 += g;
    s2 += g * g;
    s4 += g * g * g * g;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(s4 / n, 3.0, 0.08);
}

TEST(Rng, GaussianUsesBothBoxMullerOutputs) {
  Rng a(5);
  Rng b(5);
  const double g1 = a.Gaussian();
  const double g2 = a.Gaussian();
  const double u1 = 1.0 - b.Uniform();
  const double u2 = b.Uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  EXPECT_EQ(g1, r * std::cos(angle));
  EXPECT_EQ(g2, r * std::sin(angle));
  // The pair consumed exactly two raw draws.
  EXPECT_EQ(a(), b());
}

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hash, Hash64MatchesDefinitionAndSeparatesInputs) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : {3ULL, 1ULL, 4ULL}) h = Mix64(h ^ w) + 0x9e3779b97f4a7c15ULL;
  EXPECT_EQ(Hash64({3, 1, 4}), h);
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(Hash64({a, b}));
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_NE(Hash64({1, 2}), Hash64({2, 1}));
}

}  // namespace
}  // namespace pacstab
