#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nilm {

// The standard <random> distributions are implementation-defined, so every
// stochastic component draws through these helpers to stay reproducible
// across compilers.

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniformIn(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline double gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double exponential(std::mt19937_64& rng, double mean) {
    return -mean * std::log(1.0 - uniform01(rng));
}

}  // namespace nilm
