// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace m2q {

// Bad user-supplied configuration (unknown variant, invalid ratio, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries file/field context.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Internal contract violation (shape mismatch reaching execution, missing
// plan entry, accumulator bound exceeded).
class ExecError : public std::runtime_error {
public:
    explicit ExecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Round half to even. Used for every float->code conversion in the project
// so that midpoints are handled identically everywhere.
inline double round_half_even(double x) {
    const double r = std::nearbyint(x);  // FE_TONEAREST is half-to-even
    return r == 0.0 ? 0.0 : r;           // normalize -0.0
}

inline int64_t iround_half_even(double x) {
    return static_cast<int64_t>(round_half_even(x));
}

// Round half to even, then clamp into [lo, hi]. Saturates non-finite
// inputs instead of hitting undefined float->int casts.
inline int64_t round_clamp(double x, int64_t lo, int64_t hi) {
    const double r = round_half_even(x);
    if (std::isnan(r)) return lo;
    if (r <= static_cast<double>(lo)) return lo;
    if (r >= static_cast<double>(hi)) return hi;
    return static_cast<int64_t>(r);
}

inline int64_t ceil_div(int64_t a, int64_t b) {
    return (a + b - 1) / b;
}

// SplitMix64: tiny seeded generator with stable output across platforms.
// Used to derive independent per-layer / per-filter streams from one seed.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // standard normal via Box-Muller (deterministic, no libm state)
    double next_gaussian() {
        double u1 = next_unit();
        double u2 = next_unit();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    uint64_t state_;
};

// Stable stream derivation: mixes a base seed with tag values so that
// per-layer / per-filter streams do not depend on iteration order.
inline uint64_t derive_seed(uint64_t base, uint64_t tag_a, uint64_t tag_b = 0) {
    SplitMix64 mix(base ^ (tag_a * 0x9e3779b97f4a7c15ull) ^ (tag_b * 0xda942042e4dd58b5ull));
    return mix.next();
}

}  // namespace m2q
