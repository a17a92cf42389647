#pragma once

// Deterministic random source for corpus synthesis and fold shuffling.
//
// The generator is splitmix64 (Steele/Lea/Flood mixing constants): pure
// 64-bit integer arithmetic, so corpora regenerate bit-identically from
// any implementation of the same few lines.
//
// Stream layout rules (relied on by the corpus tests):
//   - uniform doubles come from the top 53 bits: (x >> 11) * 2^-53
//   - gaussian() is the Marsaglia polar method; the spare value of each
//     accepted pair is discarded, so one call consumes one whole
//     rejection run
//   - substreams are derived with derive_seed(parent, index), never by
//     sharing a generator across units of work

#include <cmath>
#include <cstdint>

namespace emf {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // modulo reduction; the bias of at most n/2^64 is irrelevant here and
  // the definition stays trivial to reimplement
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double gaussian() {
    for (;;) {
      double u = 2.0 * next_double() - 1.0;
      double v = 2.0 * next_double() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace emf
