#pragma once

#include <cstdint>
#include <random>

namespace ztwin {

// All stochastic code draws from a shared 64-bit Mersenne Twister so results
// are bit-reproducible for a given seed on every platform.  The standard
// distribution adaptors are avoided on purpose: their output is
// implementation-defined, these helpers are not.
using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).  n must be positive; bias is < 2^-32 for the
// table sizes used here and identical on every run.
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t n) {
    return rng() % n;
}

// Uniform double in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

} // namespace ztwin
