#pragma once

// Platform-independent draws on top of std::mt19937_64. The standard distributions
// are implementation-defined, so seeded results would differ between libraries.

#include <cmath>
#include <numbers>
#include <random>

namespace semtext {

/// Uniform double in the open interval (0, 1) built from 53 random bits.
inline double open_unit_interval(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = open_unit_interval(rng);
    const double u2 = open_unit_interval(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace semtext
