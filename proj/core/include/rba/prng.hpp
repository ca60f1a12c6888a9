#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace rba {

// splitmix64 step; used for seeding and for stream derivation.
std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** generator. All distributions are implemented by hand so
// that sequences are identical across platforms and standard libraries.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed);

  std::uint64_t next();

  // Uniform double in [0, 1), 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, bound); bound must be nonzero.
  std::uint64_t uniform_int(std::uint64_t bound);

  // Standard normal via Box-Muller; the spare value is cached.
  double gaussian();

  // Fisher-Yates shuffle of [first, first + n).
  template <typename T>
  void shuffle(T* first, std::size_t n) {
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      T tmp = first[i - 1];
      first[i - 1] = first[j];
      first[j] = tmp;
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream seed from (master_seed, purpose, index).
// Parallel consumers each derive their own stream, so generation order
// does not depend on scheduling.
std::uint64_t derive_stream(std::uint64_t master_seed, std::string_view purpose,
                            std::uint64_t index);

}  // namespace rba
