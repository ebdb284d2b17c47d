#pragma once

#include <cstdint>
#include <stdexcept>

namespace rumorlab {

// One SplitMix64 step. Used for seeding and for deriving substream keys.
inline std::uint64_t splitmix64_next(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless mix of two labels into one stream key.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL) ^ 0x2545f4914f6cdd1dULL;
  std::uint64_t r = splitmix64_next(s);
  return r ^ splitmix64_next(s);
}

// xoshiro256** with explicit semantics so results are identical across
// platforms. Bounded draws use rejection sampling; no std:: distribution
// objects are involved anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = mix64(seed, stream);
    for (auto& w : state_) w = splitmix64_next(s);
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

  // Lowest `nbits` of one draw, nbits in [0, 64]. This is the primitive the
  // seed-budget accounting is phrased in: one call costs exactly nbits bits.
  std::uint64_t bits(unsigned nbits) {
    if (nbits == 0) return 0;
    if (nbits > 64) throw std::invalid_argument("bits: nbits > 64");
    std::uint64_t v = next_u64();
    return nbits == 64 ? v : (v & ((std::uint64_t(1) << nbits) - 1));
  }

  // Uniform value in [0, bound), unbiased via rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below: bound must be positive");
    if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit_double() < p; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

}  // namespace rumorlab
