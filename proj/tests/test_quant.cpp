// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "m2q/builders.hpp"
#include "m2q/plan.hpp"
#include "m2q/quant.hpp"
#include "oracles.hpp"

using namespace m2q;

namespace {

std::vector<double> random_tensor(uint64_t seed, size_t n, bool gaussian) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = gaussian ? rng.next_gaussian() : rng.next_uniform(-1.5, 2.0);
    return v;
}

// per-layer (min,max) stubs so plan tests need no execution
ActivationStats flat_stats(const NetworkGraph& g) {
    ActivationStats s;
    s.input_min = -1;
    s.input_max = 1;
    for (const auto& l : g.layers) s.per_layer[l.id] = {-1.0, 1.0};
    return s;
}

}  // namespace

TEST_CASE("affine calibration matches the closed form") {
    const std::vector<double> x{-1.0, 0.25, 1.0};
    const QuantParams p = calibrate_affine(x, 8, Granularity::PerLayer);
    CHECK(p.scale == doctest::Approx(2.0 / 255.0).epsilon(1e-15));
    CHECK(p.zero_point == 128);  // round-half-even(127.5) = 128

    const std::vector<double> y{0.0, 0.5, 255.0 * 0.01};
    const QuantParams q = calibrate_affine(y, 8, Granularity::PerLayer);
    CHECK(q.zero_point == 0);  // min == 0 forces Z = 0
}

TEST_CASE("calibration equals a single-pass min/max oracle on random tensors") {
    for (uint64_t seed = 0; seed < 1024; ++seed) {
        const auto x = random_tensor(seed + 1, 64, seed % 2 == 0);
        const QuantParams p = calibrate_affine(x, 8, Granularity::PerLayer);
        const auto mm = oracle::minmax_scan(x);
        const double scale = (mm.mx - mm.mn) / 255.0;
        const int zero = static_cast<int>(
            std::clamp<int64_t>(oracle::rint_even(-mm.mn / scale), 0, 255));
        CHECK(p.scale == scale);
        CHECK(p.zero_point == zero);
    }
}

TEST_CASE("degenerate calibration range never divides by zero") {
    const std::vector<double> x{3.0, 3.0, 3.0};
    const QuantParams p = calibrate_affine(x, 8, Granularity::PerLayer);
    CHECK(p.scale == 1.0);
    CHECK(p.zero_point == 0);  // clip(round(-3)) = 0

    const std::vector<double> y{-7.0, -7.0};
    const QuantParams q = calibrate_affine(y, 8, Granularity::PerLayer);
    CHECK(q.scale == 1.0);
    CHECK(q.zero_point == 7);
    // the constant is exactly representable
    CHECK(dequantize_uniform(quantize_uniform_scalar(-7.0, q), q) == -7.0);
}

TEST_CASE("uniform quantization basics") {
    QuantParams p;
    p.scale = 0.013;
    p.zero_point = 128;
    p.bits = 8;
    CHECK(quantize_uniform_scalar(0.0, p) == 128);
    CHECK(quantize_uniform_scalar(1e9, p) == 255);   // clip high
    CHECK(quantize_uniform_scalar(-1e9, p) == 0);    // clip low
}

TEST_CASE("uniform quantization equals the scalar oracle elementwise") {
    const auto x = random_tensor(99, 4096, true);
    const QuantParams p = calibrate_affine(x, 8, Granularity::PerLayer);
    const auto codes = quantize_uniform(x, p);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(codes[i] == oracle::uniform_code_oracle(x[i], p.scale, p.zero_point, p.bits));
}

TEST_CASE("uniform quantization is monotone in the input") {
    for (uint64_t seed = 1; seed <= 200; ++seed) {
        auto x = random_tensor(seed, 64, seed % 2 == 0);
        const QuantParams p = calibrate_affine(x, 3 + static_cast<int>(seed % 6),
                                               Granularity::PerLayer);
        std::sort(x.begin(), x.end());
        uint8_t prev = 0;
        bool first = true;
        for (double v : x) {
            const uint8_t c = quantize_uniform_scalar(v, p);
            if (!first) CHECK(c >= prev);
            prev = c;
            first = false;
        }
    }
}

TEST_CASE("quantize-dequantize is idempotent for all three schemes") {
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        const auto x = random_tensor(seed, 32, seed % 2 == 0);

        const QuantParams p = calibrate_affine(x, 8, Granularity::PerFilter);
        for (double v : x) {
            const double once = dequantize_uniform(quantize_uniform_scalar(v, p), p);
            const double twice = dequantize_uniform(quantize_uniform_scalar(once, p), p);
            CHECK(twice == once);
        }

        const PoTFilter pf = quantize_pot(x, 4);
        for (size_t i = 0; i < x.size(); ++i) {
            const double once = pot_dequant(pf.codes[i], pf.scale);
            const PoTCode again = pot_encode(once, pf.scale, 4);
            CHECK(pot_dequant(again, pf.scale) == once);
        }

        const APoTFilter af = quantize_apot(x);
        for (size_t i = 0; i < x.size(); ++i) {
            const double once = apot_dequant(af.codes[i], af.scale);
            const APoTCode again = apot_encode(once, af.scale);
            CHECK(apot_dequant(again, af.scale) == once);
        }
    }
}

TEST_CASE("uniform MSE is non-increasing as bits grow") {
    const auto x = random_tensor(2024, 4096, true);
    double prev = std::numeric_limits<double>::infinity();
    for (int bits = 3; bits <= 8; ++bits) {
        const double mse = uniform_weight_mse(x, bits);
        CHECK(mse <= prev);
        prev = mse;
    }
}

TEST_CASE("PoT worked example") {
    const PoTCode c = pot_encode(-0.26, 2.0, 5);
    CHECK(c.sign == -1);
    CHECK(c.p == -3);
}

TEST_CASE("PoT edge codes") {
    // max element: log2(1) = 0, clipped at the top
    CHECK(pot_encode(2.0, 2.0, 5).p == 0);
    CHECK(pot_encode(37.0, 2.0, 5).p == 0);
    // zero maps to the smallest-magnitude positive code
    const PoTCode z = pot_encode(0.0, 1.0, 4);
    CHECK(z.sign == 1);
    CHECK(z.p == -15);
    // constant filters are rejected
    const std::vector<double> c{1.0, 1.0};
    CHECK_THROWS_AS(quantize_pot(c, 4), ConfigError);
}

TEST_CASE("PoT codes follow the documented log-domain rule") {
    for (uint64_t seed = 1; seed <= 300; ++seed) {
        const auto x = random_tensor(seed, 16, true);
        const PoTFilter f = quantize_pot(x, 4);
        for (size_t i = 0; i < x.size(); ++i) {
            const PoTCode expect = oracle::pot_rule_oracle(x[i], f.scale, 4);
            CHECK(f.codes[i].sign == expect.sign);
            CHECK(f.codes[i].p == expect.p);
        }
    }
}

TEST_CASE("log-domain rounding deliberately differs from nearest-codebook") {
    // |w|/S = 2^-2.5 rounds to p = -2 in the log domain, while the linear
    // metric prefers 2^-3 (geometric vs arithmetic midpoint). The library
    // implements the log rule; this pins the difference.
    const double scale = 1.0;
    const double w = std::pow(2.0, -2.5);
    const PoTCode c = pot_encode(w, scale, 4);
    CHECK(c.p == -2);
    const double nearest = oracle::pot_nearest_oracle(w, scale, 4);
    CHECK(nearest == std::ldexp(1.0, -3));
    CHECK(pot_dequant(c, scale) != nearest);
}

TEST_CASE("PoT dequantized values live in the enumerated codebook") {
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        const auto x = random_tensor(seed, 16, false);
        const PoTFilter f = quantize_pot(x, 4);
        for (const auto& c : f.codes) {
            const double v = pot_dequant(c, f.scale);
            bool found = false;
            for (int s = -1; s <= 1 && !found; s += 2)
                for (int p = -15; p <= 0 && !found; ++p)
                    if (v == s * f.scale * std::ldexp(1.0, p)) found = true;
            CHECK(found);
        }
    }
}

TEST_CASE("APoT encodes zero exactly and hits codebook points") {
    CHECK(apot_dequant(apot_encode(0.0, 1.0), 1.0) == 0.0);
    CHECK(apot_encode(0.0, 1.0).zero);

    // a codebook member encodes with zero error
    const double scale = 0.7;
    const double member = scale * (std::ldexp(1.0, 0) + std::ldexp(1.0, -4));
    CHECK(apot_dequant(apot_encode(member, scale), scale) == member);
    CHECK(apot_dequant(apot_encode(-member, scale), scale) == -member);
}

TEST_CASE("APoT equals the exhaustive codebook search") {
    for (uint64_t seed = 1; seed <= 300; ++seed) {
        const auto x = random_tensor(seed, 16, seed % 2 == 0);
        const APoTFilter f = quantize_apot(x);
        for (size_t i = 0; i < x.size(); ++i) {
            const double got = apot_dequant(f.codes[i], f.scale);
            CHECK(got == oracle::apot_nearest_oracle(x[i], f.scale));
        }
    }
}

TEST_CASE("APoT dequantized values live in the enumerated codebook") {
    const double scale = 1.3;
    const auto cb = apot_codebook(scale);
    CHECK(cb.size() == 33);
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        const auto x = random_tensor(seed, 16, true);
        const APoTFilter f = quantize_apot(x);
        const auto fcb = apot_codebook(f.scale);
        for (const auto& c : f.codes) {
            const double v = apot_dequant(c, f.scale);
            CHECK(std::find(fcb.begin(), fcb.end(), v) != fcb.end());
        }
    }
}

TEST_CASE("scheme selection: exact-grid filters prefer uniform") {
    // values sitting on the 8-bit uniform grid quantize with zero error
    // (power-of-two scale keeps the calibration arithmetic exact)
    std::vector<double> w(256);
    const double scale = 0.0078125;  // 2^-7
    for (int i = 0; i < 256; ++i) w[static_cast<size_t>(i)] = (i - 128) * scale;
    CHECK(uniform_weight_mse(w, 8) == 0.0);
    CHECK(select_scheme(w) == Scheme::Uniform8);
}

TEST_CASE("scheme selection: APoT-aligned filters prefer APoT") {
    // mass at an APoT codepoint (0.515625 = 2^-1 + 2^-6 of the range)
    // placed near a uniform half-step; extremes anchor the range
    std::vector<double> w;
    w.push_back(0.0);
    for (int i = 0; i < 98; ++i) w.push_back(0.515625);
    w.push_back(1.0);
    const double mse_apot = apot_weight_mse(w);
    const double mse_uni = uniform_weight_mse(w, 8);
    CHECK(mse_apot < mse_uni);
    CHECK(select_scheme(w) == Scheme::APoT);
}

namespace {

// filter with its mass on an APoT codepoint that sits between uniform grid
// points; APoT wins the MSE comparison on these
std::vector<double> apot_friendly_filter(uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> w;
    w.push_back(0.0);
    for (int i = 0; i < 98; ++i) w.push_back(0.515625 + rng.next_uniform(-4e-4, 4e-4));
    w.push_back(1.0);
    return w;
}

}  // namespace

TEST_CASE("scheme selection agrees with the brute-force oracle on 1000 filters") {
    int apot_count = 0;
    for (uint64_t seed = 1; seed <= 1000; ++seed) {
        const auto w = seed % 3 == 2 ? apot_friendly_filter(seed)
                                     : random_tensor(seed, 32, seed % 2 == 0);
        const Scheme got = select_scheme(w);
        CHECK(got == oracle::select_scheme_oracle(w));
        if (got == Scheme::APoT) ++apot_count;
    }
    // both branches must actually be exercised
    CHECK(apot_count > 0);
    CHECK(apot_count < 1000);
}

TEST_CASE("selected scheme never has larger MSE than the rejected one") {
    for (uint64_t seed = 1; seed <= 500; ++seed) {
        const auto w = random_tensor(seed * 7 + 1, 24, seed % 3 == 0);
        const double mu = uniform_weight_mse(w, 8);
        const double ma = apot_weight_mse(w);
        if (select_scheme(w) == Scheme::APoT)
            CHECK(ma <= mu);
        else
            CHECK(mu <= ma);
    }
}

TEST_CASE("assign_m2q hits the exact per-layer ratio") {
    GraphBuilder b("ratio", 8, 4, 4);
    b.pwconv(-1, 1024, Activation::None, "wide");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 11);

    PlanOptions opt;
    opt.target_ratio = 0.5;
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);
    CHECK(plan.apot_filters == 512);
    CHECK(plan.uniform_filters == 512);
    CHECK(plan.achieved_apot_fraction == 0.5);
}

TEST_CASE("ratio 0 degenerates to the uniform plan; ratio bounds enforced") {
    GraphBuilder b("deg", 8, 4, 4);
    int x = b.dwconv(-1, 3, 1, Activation::ReLU, "dw");
    x = b.pwconv(x, 32, Activation::None, "pw");
    b.matmul({x}, 16, 1, true, Activation::None, "mm");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 5);

    PlanOptions zero;
    zero.target_ratio = 0.0;
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), zero);
    CHECK(plan.apot_filters == 0);
    for (const auto& [id, lp] : plan.layers)
        for (const auto& f : lp.filters) CHECK(f.scheme == Scheme::Uniform8);

    PlanOptions one;
    one.target_ratio = 1.0;
    const QuantPlan all = assign_m2q(g, w, flat_stats(g), one);
    CHECK(all.uniform_filters == 0);

    PlanOptions bad;
    bad.target_ratio = 1.5;
    CHECK_THROWS_AS(assign_m2q(g, w, flat_stats(g), bad), ConfigError);
}

TEST_CASE("per-filter choices reproduce an independent top-k ranking") {
    GraphBuilder b("rank", 8, 4, 4);
    const int pw = b.pwconv(-1, 64, Activation::None, "pw");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 21);

    PlanOptions opt;
    opt.target_ratio = 0.25;
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);

    // independent ranking by MSE gain, stable on index
    const LayerSpec& l = *g.find(pw);
    std::vector<std::pair<double, int64_t>> gain;
    for (int64_t f = 0; f < l.filters; ++f) {
        const auto fw = w.filter(l, f);
        gain.push_back({oracle::uniform_mse_oracle(fw, 8) - oracle::apot_mse_oracle(fw), f});
    }
    std::stable_sort(gain.begin(), gain.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const int64_t k = std::llround(0.25 * static_cast<double>(l.filters));
    std::vector<bool> expect_apot(static_cast<size_t>(l.filters), false);
    for (int64_t i = 0; i < k; ++i) expect_apot[static_cast<size_t>(gain[static_cast<size_t>(i)].second)] = true;

    const LayerPlan& lp = plan.at(pw);
    for (int64_t f = 0; f < l.filters; ++f)
        CHECK((lp.filters[static_cast<size_t>(f)].scheme == Scheme::APoT) ==
              expect_apot[static_cast<size_t>(f)]);
}

TEST_CASE("achieved network ratio stays within the per-layer rounding bound") {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        SplitMix64 rng(seed);
        GraphBuilder b("bound", 8, 4, 4);
        int prev = -1;
        int64_t total_filters = 0;
        int layers = 0;
        for (int i = 0; i < 4; ++i) {
            const int64_t f = 8 + static_cast<int64_t>(rng.next() % 56);
            prev = b.pwconv(prev, f, Activation::None, "pw" + std::to_string(i));
            total_filters += f;
            ++layers;
        }
        const NetworkGraph g = b.take();
        const WeightStore w = synthesize_weights(g, seed);
        const double r = 0.1 + 0.8 * SplitMix64(seed * 13).next_unit();

        PlanOptions opt;
        opt.target_ratio = r;
        const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);
        const double bound =
            static_cast<double>(layers) / static_cast<double>(total_filters);
        CHECK(std::abs(plan.achieved_apot_fraction - r) <= bound + 1e-12);
    }
}

TEST_CASE("network-wide scope balances globally, not per layer") {
    GraphBuilder b("scope", 8, 4, 4);
    const int a = b.pwconv(-1, 32, Activation::None, "a");
    b.pwconv(a, 32, Activation::None, "b");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 17);

    PlanOptions opt;
    opt.target_ratio = 0.5;
    opt.scope = RatioScope::NetworkWide;
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);
    CHECK(plan.apot_filters == 32);  // half of 64, wherever the gains are

    opt.scope = RatioScope::PerLayer;
    const QuantPlan per = assign_m2q(g, w, flat_stats(g), opt);
    for (const auto& [id, lp] : per.layers)
        if (lp.category == LayerCategory::ComputationIntensive)
            CHECK(lp.apot_filter_count() == 16);
}

TEST_CASE("plans serialize and reload losslessly") {
    GraphBuilder b("io", 8, 4, 4);
    int x = b.dwconv(-1, 3, 1, Activation::ReLU, "dw");
    b.pwconv(x, 16, Activation::None, "pw");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 9);
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), {});

    const auto path =
        (std::filesystem::temp_directory_path() / "m2q_plan_test.json").string();
    save_plan(plan, path);
    const QuantPlan back = load_plan(path);

    CHECK(back.options.target_ratio == plan.options.target_ratio);
    CHECK(back.options.dw_bits == plan.options.dw_bits);
    CHECK(back.achieved_apot_fraction == plan.achieved_apot_fraction);
    REQUIRE(back.layers.size() == plan.layers.size());
    for (const auto& [id, lp] : plan.layers) {
        const LayerPlan& bl = back.at(id);
        CHECK(bl.quantized == lp.quantized);
        CHECK(bl.activation.scale == lp.activation.scale);
        CHECK(bl.activation.zero_point == lp.activation.zero_point);
        REQUIRE(bl.filters.size() == lp.filters.size());
        for (size_t i = 0; i < lp.filters.size(); ++i) {
            CHECK(bl.filters[i].scheme == lp.filters[i].scheme);
            if (lp.filters[i].scheme == Scheme::APoT)
                CHECK(bl.filters[i].apot_scale == lp.filters[i].apot_scale);
            else
                CHECK(bl.filters[i].uniform.scale == lp.filters[i].uniform.scale);
        }
    }
}
