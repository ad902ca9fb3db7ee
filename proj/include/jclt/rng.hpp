#pragma once

#include <cstdint>
#include <limits>

namespace jclt {

/// A (root, stream) pair. Each replica of a Monte Carlo run owns one stream;
/// equal pairs reproduce bit-identical draws, distinct pairs are independent.
struct Seed {
  std::uint64_t root = 0;
  std::uint64_t stream = 0;
};

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** seeded through splitmix64 from (root, stream).
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(Seed seed) {
    std::uint64_t sm = seed.root;
    const std::uint64_t root_mix = splitmix64(sm);
    std::uint64_t st = seed.stream ^ 0xD1B54A32D192ED03ULL;
    const std::uint64_t stream_mix = splitmix64(st);
    std::uint64_t x = root_mix ^ (stream_mix * 0xFF51AFD7ED558CCDULL);
    for (auto& word : s_) word = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
};

}  // namespace jclt
