#include "rba/prng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rba {
namespace {

TEST(Prng, DeterministicGivenSeed) {
  Xoshiro256ss a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Prng, DifferentSeedsDiverge) {
  Xoshiro256ss a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += a.next() == b.next();
  EXPECT_LT(equal, 4);
}

TEST(Prng, UniformStaysInHalfOpenInterval) {
  Xoshiro256ss rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Prng, UniformIntBounds) {
  Xoshiro256ss rng(11);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.uniform_int(7), 7u);
  // A bound of one must always return zero.
  for (int i = 0; i < 10; ++i) EXPECT_EQ(rng.uniform_int(1), 0u);
}

TEST(Prng, GaussianMomentsAreSane) {
  Xoshiro256ss rng(13);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Prng, DerivedStreamsAreIndependentOfEachOther) {
  const std::uint64_t s1 = derive_stream(1, "scene", 0);
  const std::uint64_t s2 = derive_stream(1, "scene", 1);
  const std::uint64_t s3 = derive_stream(1, "noise", 0);
  const std::uint64_t s4 = derive_stream(2, "scene", 0);
  EXPECT_NE(s1, s2);
  EXPECT_NE(s1, s3);
  EXPECT_NE(s1, s4);
  EXPECT_EQ(s1, derive_stream(1, "scene", 0));
}

TEST(Prng, ShuffleIsAPermutation) {
  Xoshiro256ss rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v.data(), v.size());
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

}  // namespace
}  // namespace rba
