// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

//
// Uniform, power-of-two (PoT) and additive power-of-two (APoT) quantizers.
//
// Uniform:  q = clip(round(x/S) + Z, 0, 2^b - 1)
//           S = (max - min) / (2^b - 1),  Z = clip(round(-min/S), 0, 2^b - 1)
// PoT:      w ~ s * S * 2^p,  s = sign(w),
//           p = clip(round(log2|w/S|), -2^b + 1, 0),  S = max(w) - min(w)
// APoT:     w ~ s * S * (2^p1 + 2^p2), nearest entry of the enumerated
//           codebook; 5-bit layout: sign, p1 in {0..-3}, p2 in {-4..-7},
//           plus a reserved exact-zero code (33 signed values).
//
// All rounding is round-half-to-even. Degenerate calibration ranges
// (max == min) fall back to S = 1, Z = clip(round(-min), 0, 2^b - 1) so a
// constant tensor never divides by zero.
//

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "m2q/common.hpp"

namespace m2q {

enum class Granularity { PerLayer, PerFilter };

struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;
    int bits = 8;
    Granularity granularity = Granularity::PerLayer;

    int max_code() const { return (1 << bits) - 1; }
};

QuantParams calibrate_affine_minmax(double mn, double mx, int bits, Granularity gran);
QuantParams calibrate_affine(std::span<const double> samples, int bits, Granularity gran);

std::vector<uint8_t> quantize_uniform(std::span<const double> x, const QuantParams& p);
uint8_t quantize_uniform_scalar(double x, const QuantParams& p);
double dequantize_uniform(uint8_t code, const QuantParams& p);
std::vector<double> dequantize_uniform(std::span<const uint8_t> codes, const QuantParams& p);

// --- PoT ----------------------------------------------------------------

struct PoTCode {
    int8_t sign = 1;  // -1 or +1
    int p = 0;        // exponent, in [-2^b + 1, 0]
};

struct PoTFilter {
    std::vector<PoTCode> codes;
    double scale = 1.0;
    int bits = 0;
};

// Encode one weight against an explicit scale. w == 0 maps to the
// smallest-magnitude code with sign +1.
PoTCode pot_encode(double w, double scale, int bits);
double pot_dequant(const PoTCode& c, double scale);

// Filter-level PoT with the scale rule S = max(w) - min(w). Requires a
// non-constant filter.
PoTFilter quantize_pot(std::span<const double> w, int bits);

// --- APoT ---------------------------------------------------------------

// p1 ranges over {0,-1,-2,-3}, p2 over {-4,-5,-6,-7}; disjoint ranges make
// the two-term decomposition unique. Smallest representable exponent is
// kApotPMin; shift_multiply aligns fixed point against it.
inline constexpr int kApotP1Max = 0;
inline constexpr int kApotP1Min = -3;
inline constexpr int kApotP2Max = -4;
inline constexpr int kApotP2Min = -7;
inline constexpr int kApotPMin = kApotP2Min;
inline constexpr int kApotBits = 5;

struct APoTCode {
    int8_t sign = 1;
    int p1 = 0;
    int p2 = kApotP2Max;
    bool zero = false;
};

struct APoTFilter {
    std::vector<APoTCode> codes;
    double scale = 1.0;
};

// Non-negative magnitudes (2^p1 + 2^p2) of the codebook, ascending; the
// signed codebook is {0} union {+/- scale * m}. 16 magnitudes + zero ->
// 33 signed values.
std::span<const double> apot_magnitudes();
std::vector<double> apot_codebook(double scale);

// Nearest-codebook encoding; exact ties resolve to the smaller magnitude.
APoTCode apot_encode(double w, double scale);
double apot_dequant(const APoTCode& c, double scale);

// Filter-level APoT with the same scale rule as PoT. `bits` must be 5 (the
// fixed code layout); the parameter exists for interface symmetry.
APoTFilter quantize_apot(std::span<const double> w, int bits = kApotBits);

// --- scheme selection ---------------------------------------------------

enum class Scheme { Uniform8, APoT };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// Mean squared quantization error of a filter under each scheme.
double uniform_weight_mse(std::span<const double> w, int bits = 8);
double apot_weight_mse(std::span<const double> w);

// Picks the scheme with the smaller MSE; ties go to Uniform8.
Scheme select_scheme(std::span<const double> w);

}  // namespace m2q
