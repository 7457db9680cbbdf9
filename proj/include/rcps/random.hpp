#ifndef RCPS_RANDOM_HPP
#define RCPS_RANDOM_HPP

#include <cstdint>
#include <random>

namespace rcps {

// All simulations draw from this engine. mt19937_64 output is fixed by the
// standard, and the helpers below avoid the implementation-defined
// std::*_distribution classes, so traces are identical across toolchains.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

// Uniform index in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

// Deterministic child seed for replicate/sub-stream `index` of `seed`.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace rcps

#endif  // RCPS_RANDOM_HPP
