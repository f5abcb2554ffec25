#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace plaque {

using Rng = std::mt19937_64;

// splitmix64 finalizer; bijective on 64-bit values.
std::uint64_t mix64(std::uint64_t x);

// Stable seed derivation. All randomness in the project flows from a master
// seed through this function, keyed by a purpose tag and up to two integers
// (fold index, patient id, epoch, ...). The result does not depend on
// platform, thread count or call order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t a = 0, std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t master, std::string_view purpose,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(master, purpose, a, b));
}

// Uniform double in [0, 1) from the top 53 bits; used instead of
// std::uniform_real_distribution where the exact bit pattern matters.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal draw (Box-Muller, one value per call).
inline double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Integer uniform in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

}  // namespace plaque
