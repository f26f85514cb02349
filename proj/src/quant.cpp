// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/quant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace m2q {

QuantParams calibrate_affine_minmax(double mn, double mx, int bits, Granularity gran) {
    if (bits < 3 || bits > 8) throw ConfigError("bits must be in [3,8]");
    if (mx < mn) throw ConfigError("calibration range has max < min");
    QuantParams p;
    p.bits = bits;
    p.granularity = gran;
    if (mx == mn) {
        // degenerate range: unit scale keeps the constant representable
        p.scale = 1.0;
        p.zero_point = static_cast<int>(round_clamp(-mn, 0, p.max_code()));
        return p;
    }
    p.scale = (mx - mn) / static_cast<double>(p.max_code());
    p.zero_point = static_cast<int>(round_clamp(-mn / p.scale, 0, p.max_code()));
    return p;
}

QuantParams calibrate_affine(std::span<const double> samples, int bits, Granularity gran) {
    if (samples.empty()) throw ConfigError("cannot calibrate an empty sample set");
    double mn = samples[0], mx = samples[0];
    for (double v : samples) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    return calibrate_affine_minmax(mn, mx, bits, gran);
}

uint8_t quantize_uniform_scalar(double x, const QuantParams& p) {
    return static_cast<uint8_t>(
        round_clamp(x / p.scale, -int64_t{p.zero_point}, p.max_code() - p.zero_point) +
        p.zero_point);
}

std::vector<uint8_t> quantize_uniform(std::span<const double> x, const QuantParams& p) {
    std::vector<uint8_t> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = quantize_uniform_scalar(x[i], p);
    return out;
}

double dequantize_uniform(uint8_t code, const QuantParams& p) {
    return (static_cast<int>(code) - p.zero_point) * p.scale;
}

std::vector<double> dequantize_uniform(std::span<const uint8_t> codes, const QuantParams& p) {
    std::vector<double> out(codes.size());
    for (size_t i = 0; i < codes.size(); ++i) out[i] = dequantize_uniform(codes[i], p);
    return out;
}

// --- PoT ----------------------------------------------------------------

PoTCode pot_encode(double w, double scale, int bits) {
    if (scale <= 0) throw ConfigError("pot_encode: scale must be positive");
    const int p_min = -(1 << bits) + 1;
    PoTCode c;
    c.sign = w < 0 ? -1 : 1;
    if (w == 0.0) {
        c.p = p_min;
        return c;
    }
    const double lg = std::log2(std::abs(w / scale));
    if (!std::isfinite(lg)) {  // |w|/scale underflowed to zero
        c.p = p_min;
        return c;
    }
    c.p = static_cast<int>(std::clamp<int64_t>(iround_half_even(lg), p_min, 0));
    return c;
}

double pot_dequant(const PoTCode& c, double scale) {
    return c.sign * scale * std::ldexp(1.0, c.p);
}

PoTFilter quantize_pot(std::span<const double> w, int bits) {
    if (w.empty()) throw ConfigError("quantize_pot: empty filter");
    const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
    const double scale = *mx - *mn;
    if (scale <= 0) throw ConfigError("quantize_pot: constant filter (max == min)");
    PoTFilter f;
    f.scale = scale;
    f.bits = bits;
    f.codes.reserve(w.size());
    for (double v : w) f.codes.push_back(pot_encode(v, scale, bits));
    return f;
}

// --- APoT ---------------------------------------------------------------

namespace {

// 16 magnitudes (2^p1 + 2^p2), ascending
std::array<double, 16> make_magnitudes() {
    std::array<double, 16> m{};
    size_t i = 0;
    for (int p1 = kApotP1Min; p1 <= kApotP1Max; ++p1)
        for (int p2 = kApotP2Min; p2 <= kApotP2Max; ++p2)
            m[i++] = std::ldexp(1.0, p1) + std::ldexp(1.0, p2);
    std::sort(m.begin(), m.end());
    return m;
}

const std::array<double, 16>& magnitudes() {
    static const std::array<double, 16> m = make_magnitudes();
    return m;
}

// decompose a magnitude back into (p1, p2); exact because ranges are
// disjoint
void decompose(double mag, int& p1, int& p2) {
    for (int a = kApotP1Max; a >= kApotP1Min; --a) {
        const double rest = mag - std::ldexp(1.0, a);
        for (int b = kApotP2Max; b >= kApotP2Min; --b) {
            if (rest == std::ldexp(1.0, b)) {
                p1 = a;
                p2 = b;
                return;
            }
        }
    }
    throw ExecError("apot: magnitude not in codebook");
}

}  // namespace

std::span<const double> apot_magnitudes() { return magnitudes(); }

std::vector<double> apot_codebook(double scale) {
    std::vector<double> cb;
    cb.reserve(33);
    for (auto it = magnitudes().rbegin(); it != magnitudes().rend(); ++it)
        cb.push_back(-scale * *it);
    cb.push_back(0.0);
    for (double m : magnitudes()) cb.push_back(scale * m);
    return cb;
}

APoTCode apot_encode(double w, double scale) {
    if (scale <= 0) throw ConfigError("apot_encode: scale must be positive");
    const double sign = w < 0 ? -1.0 : 1.0;
    APoTCode best;
    best.zero = true;
    double best_err = std::abs(w);  // zero code
    for (double m : magnitudes()) {
        const double err = std::abs(w - sign * scale * m);
        // strict improvement: ties keep the earlier (smaller) magnitude
        if (err < best_err) {
            best_err = err;
            best.zero = false;
            best.sign = w < 0 ? -1 : 1;
            decompose(m, best.p1, best.p2);
        }
    }
    return best;
}

double apot_dequant(const APoTCode& c, double scale) {
    if (c.zero) return 0.0;
    return c.sign * scale * (std::ldexp(1.0, c.p1) + std::ldexp(1.0, c.p2));
}

APoTFilter quantize_apot(std::span<const double> w, int bits) {
    if (bits != kApotBits)
        throw ConfigError("quantize_apot: only the 5-bit layout is supported");
    if (w.empty()) throw ConfigError("quantize_apot: empty filter");
    const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
    const double scale = *mx - *mn;
    if (scale <= 0) throw ConfigError("quantize_apot: constant filter (max == min)");
    APoTFilter f;
    f.scale = scale;
    f.codes.reserve(w.size());
    for (double v : w) f.codes.push_back(apot_encode(v, scale));
    return f;
}

// --- scheme selection ---------------------------------------------------

const char* to_string(Scheme s) { return s == Scheme::Uniform8 ? "uniform8" : "apot"; }

Scheme scheme_from_string(const std::string& s) {
    if (s == "uniform8") return Scheme::Uniform8;
    if (s == "apot") return Scheme::APoT;
    throw ParseError("unknown scheme: " + s);
}

double uniform_weight_mse(std::span<const double> w, int bits) {
    const QuantParams p = calibrate_affine(w, bits, Granularity::PerFilter);
    double acc = 0;
    for (double v : w) {
        const double d = dequantize_uniform(quantize_uniform_scalar(v, p), p) - v;
        acc += d * d;
    }
    return acc / static_cast<double>(w.size());
}

double apot_weight_mse(std::span<const double> w) {
    const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
    const double scale = *mx - *mn;
    if (scale <= 0) {
        // constant filter: APoT cannot represent it better than its
        // nearest code against any positive scale; treat scale 1
        double acc = 0;
        for (double v : w) {
            const double d = apot_dequant(apot_encode(v, 1.0), 1.0) - v;
            acc += d * d;
        }
        return acc / static_cast<double>(w.size());
    }
    double acc = 0;
    for (double v : w) {
        const double d = apot_dequant(apot_encode(v, scale), scale) - v;
        acc += d * d;
    }
    return acc / static_cast<double>(w.size());
}

Scheme select_scheme(std::span<const double> w) {
    return apot_weight_mse(w) < uniform_weight_mse(w) ? Scheme::APoT : Scheme::Uniform8;
}

}  // namespace m2q
