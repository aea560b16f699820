#pragma once
// Deterministic, platform-independent random streams.
//
// All randomness in the library flows from a single top-level seed through
// named substreams (init, corruption, eval, dropout, ...), so each module is
// reproducible on its own. std::uniform_* distributions are
// implementation-defined, so sampling is done by hand on top of splitmix64.

#include <cstdint>
#include <string_view>

namespace kge {

inline constexpr uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, used only to turn stream names into seed material.
inline constexpr uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Mix an arbitrary number of 64-bit words into one seed.
inline constexpr uint64_t mix_seed(uint64_t a) {
  uint64_t s = a;
  return splitmix64_next(s);
}
template <typename... Rest>
inline constexpr uint64_t mix_seed(uint64_t a, uint64_t b, Rest... rest) {
  uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
  return mix_seed(splitmix64_next(s), rest...);
}

// Counter-free small PRNG (splitmix64 walk). One instance per logical
// stream; streams are derived, never shared.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64_next(state_); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t uniform_below(uint64_t n) {
    // n == 0 would be a caller bug; keep the check cheap.
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
  }

  bool bernoulli(double p) { return uniform_real() < p; }

 private:
  uint64_t state_;
};

// Named substream of a top-level seed.
inline Rng substream(uint64_t seed, std::string_view name) {
  return Rng(mix_seed(seed, fnv1a(name)));
}

// Indexed substream, e.g. one per positive triple in a batch.
inline Rng substream(uint64_t seed, std::string_view name, uint64_t index) {
  return Rng(mix_seed(seed, fnv1a(name), index));
}

}  // namespace kge
