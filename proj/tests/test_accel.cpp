// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "m2q/accel.hpp"
#include "m2q/builders.hpp"
#include "m2q/plan.hpp"
#include "m2q/schedule.hpp"
#include "oracles.hpp"

using namespace m2q;

namespace {

// single-core config: the engine-model examples are defined against it
HardwareConfig one_core() {
    HardwareConfig cfg = HardwareConfig::defaults();
    cfg.L = 1;
    return cfg;
}

LayerSpec dw_layer(int64_t c, int64_t h, int64_t w, int k, int stride) {
    LayerSpec l;
    l.id = 0;
    l.kind = LayerKind::DWConv;
    l.input = Shape::chw(c, h, w);
    l.kernel_h = l.kernel_w = k;
    l.stride = stride;
    l.filters = c;
    return l;
}

LayerSpec pw_layer(int64_t c, int64_t h, int64_t w, int64_t filters) {
    LayerSpec l;
    l.id = 0;
    l.kind = LayerKind::PWConv;
    l.input = Shape::chw(c, h, w);
    l.filters = filters;
    return l;
}

LayerSpec mm_layer(int64_t rows, int64_t cols, int64_t filters, int groups) {
    LayerSpec l;
    l.id = 0;
    l.kind = LayerKind::MatMul;
    l.input = Shape::rc(rows, cols);
    l.filters = filters;
    l.groups = groups;
    return l;
}

ActivationStats flat_stats(const NetworkGraph& g) {
    ActivationStats s;
    s.input_min = -1;
    s.input_max = 1;
    for (const auto& l : g.layers) s.per_layer[l.id] = {-1.0, 1.0};
    return s;
}

}  // namespace

TEST_CASE("single-mode corner cases") {
    const HardwareConfig cfg = one_core();
    // one MAC on one multiplier
    CHECK(cycles_mpma_single(dw_layer(1, 1, 1, 1, 1), cfg, 4).cycles == 1);
    // full tile row: kw cycles emit T outputs (one kernel column per cycle)
    const auto c = cycles_mpma_single(dw_layer(3, 4, 4, 3, 1), cfg, 4);
    CHECK(c.cycles == 3);  // ceil(3/3) * ceil(16/16) * ceil(3/3) * 3
    // channel doubling doubles cycles when channels are block-aligned
    const auto c1 = cycles_mpma_single(dw_layer(6, 4, 4, 3, 1), cfg, 4);
    const auto c2 = cycles_mpma_single(dw_layer(12, 4, 4, 3, 1), cfg, 4);
    CHECK(c2.cycles == 2 * c1.cycles);
    // weights wider than 4 bits halve the pixel parallelism
    const auto c4 = cycles_mpma_single(dw_layer(3, 8, 8, 3, 1), cfg, 4);
    const auto c8 = cycles_mpma_single(dw_layer(3, 8, 8, 3, 1), cfg, 8);
    CHECK(c8.cycles == 2 * c4.cycles);
    // kernels taller than R tile over row groups
    const auto c5 = cycles_mpma_single(dw_layer(3, 8, 8, 5, 1), cfg, 4);
    // ceil(C/M) * ceil(P/T) * ceil(kh/R) row groups * kw
    CHECK(c5.cycles == 1 * 4 * ceil_div(5, 3) * 5);
}

TEST_CASE("merged-mode corner cases") {
    const HardwareConfig cfg = one_core();
    // perfect fit: C = R*M, F = T/2, one pixel
    CHECK(cycles_mpma_merged(pw_layer(9, 1, 1, 8), 8, cfg).cycles == 1);
    // one filter beyond a tile-pair step doubles the count
    CHECK(cycles_mpma_merged(pw_layer(9, 1, 1, 9), 9, cfg).cycles == 2);
    // no uniform filters, no work
    CHECK(cycles_mpma_merged(pw_layer(9, 1, 1, 8), 0, cfg).cycles == 0);
    CHECK(cycles_mpma_merged(pw_layer(9, 1, 1, 8), 0, cfg).macs == 0);
}

TEST_CASE("sat corner cases") {
    const HardwareConfig cfg = one_core();
    // perfect fit: C = N, F = S_tiles, one row
    CHECK(cycles_sat(mm_layer(1, 9, 8, 1), 8, cfg).cycles == 1);
    CHECK(cycles_sat(mm_layer(1, 9, 8, 1), 0, cfg).cycles == 0);
    const auto c = cycles_sat(mm_layer(4, 18, 16, 1), 16, cfg);
    CHECK(c.cycles == 2 * 2 * 4);
    CHECK(c.su_ops == 16 * 18 * 4);
    CHECK(c.weight_bits == 5);
}

TEST_CASE("engine kind preconditions") {
    const HardwareConfig cfg = one_core();
    CHECK_THROWS_AS(cycles_mpma_single(pw_layer(4, 2, 2, 4), cfg, 4), ConfigError);
    CHECK_THROWS_AS(cycles_mpma_merged(dw_layer(4, 2, 2, 3, 1), 4, cfg), ConfigError);
    CHECK_THROWS_AS(cycles_sat(dw_layer(4, 2, 2, 3, 1), 4, cfg), ConfigError);

    HardwareConfig odd = cfg;
    odd.T = 7;  // merged mode pairs tiles
    CHECK_THROWS_AS(cycles_mpma_merged(pw_layer(9, 1, 1, 8), 8, odd), ConfigError);
}

TEST_CASE("analytic cycle counts equal the event-driven simulation") {
    SplitMix64 rng(2026);
    int checked = 0;
    for (int trial = 0; trial < 220; ++trial) {
        HardwareConfig cfg = HardwareConfig::defaults();
        const int ls[] = {1, 2, 4, 16};
        cfg.L = ls[rng.next() % 4];
        const int ts[] = {4, 8, 16};
        cfg.T = ts[rng.next() % 3];
        cfg.N = 3 + static_cast<int>(rng.next() % 10);
        cfg.S_tiles = 2 + static_cast<int>(rng.next() % 8);
        cfg.M = 1 + static_cast<int>(rng.next() % 4);
        cfg.R = 1 + static_cast<int>(rng.next() % 4);

        const int kind = static_cast<int>(rng.next() % 3);
        if (kind == 0) {
            const int64_t c = 1 + static_cast<int64_t>(rng.next() % 40);
            const int64_t h = 1 + static_cast<int64_t>(rng.next() % 14);
            const int64_t w = 1 + static_cast<int64_t>(rng.next() % 14);
            const int k = 1 + 2 * static_cast<int>(rng.next() % 3);  // 1/3/5
            const int stride = 1 + static_cast<int>(rng.next() % 2);
            const int dw_bits = 3 + static_cast<int>(rng.next() % 6);
            const LayerSpec l = dw_layer(c, h, w, k, stride);
            const auto got = cycles_mpma_single(l, cfg, dw_bits);
            const auto want = oracle::event_mpma_single(l, cfg, dw_bits);
            CHECK(got.cycles == want.cycles);
            CHECK(got.macs == want.macs);
            CHECK(got.weight_reads == want.weight_reads);
            CHECK(got.act_reads == want.act_reads);
            CHECK(got.act_writes == want.act_writes);
            CHECK(got.n_tiles == want.n_tiles);
        } else if (kind == 1) {
            const int64_t c = 1 + static_cast<int64_t>(rng.next() % 64);
            const int64_t h = 1 + static_cast<int64_t>(rng.next() % 10);
            const int64_t w = 1 + static_cast<int64_t>(rng.next() % 10);
            const int64_t f = 1 + static_cast<int64_t>(rng.next() % 64);
            const int64_t fu = static_cast<int64_t>(rng.next() % (f + 1));
            const LayerSpec l = pw_layer(c, h, w, f);
            const auto got = cycles_mpma_merged(l, fu, cfg);
            const auto want = oracle::event_mpma_merged(l, fu, cfg);
            CHECK(got.cycles == want.cycles);
            CHECK(got.macs == want.macs);
            CHECK(got.weight_reads == want.weight_reads);
            CHECK(got.act_reads == want.act_reads);
            CHECK(got.act_writes == want.act_writes);
            if (fu > 0) CHECK(got.n_tiles == want.n_tiles);
        } else {
            const int groups = 1 + static_cast<int>(rng.next() % 4);
            const int64_t cg = 1 + static_cast<int64_t>(rng.next() % 24);
            const int64_t rows = 1 + static_cast<int64_t>(rng.next() % 80);
            const int64_t fpg = 1 + static_cast<int64_t>(rng.next() % 16);
            const int64_t f = fpg * groups;
            const int64_t fa = static_cast<int64_t>(rng.next() % (f + 1));
            const LayerSpec l = mm_layer(rows, cg * groups, f, groups);
            const auto got = cycles_sat(l, fa, cfg);
            const auto want = oracle::event_sat(l, fa, cfg);
            CHECK(got.cycles == want.cycles);
            CHECK(got.su_ops == want.su_ops);
            CHECK(got.weight_reads == want.weight_reads);
            CHECK(got.act_reads == want.act_reads);
            CHECK(got.act_writes == want.act_writes);
            if (fa > 0) CHECK(got.n_tiles == want.n_tiles);
        }
        ++checked;
    }
    CHECK(checked == 220);
}

TEST_CASE("engine assignments partition every quantized filter") {
    const NetworkGraph g = build_efficientvit(Variant::B1, 224);
    const WeightStore w = synthesize_weights(g, 5);
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), {});
    const auto assignments = build_engine_assignments(g, plan);

    size_t weighted = 0;
    for (const auto& l : g.layers)
        if (l.has_weights()) ++weighted;
    CHECK(assignments.size() == weighted);

    bool any_split = false;
    for (const auto& a : assignments) {
        const LayerSpec* l = g.find(a.layer_id);
        REQUIRE(l != nullptr);
        CHECK(a.mpma_filters + a.sat_filters == l->filters);
        if (l->kind == LayerKind::DWConv) {
            CHECK(a.mpma_mode == EngineKind::MPMA_Single);
            CHECK(a.sat_filters == 0);
        }
        if (!l->quantize_weights) CHECK(a.sat_filters == 0);
        if (a.split()) any_split = true;
    }
    CHECK(any_split);
}

TEST_CASE("schedule: a single layer cannot pipeline") {
    GraphBuilder b("one", 9, 4, 4);
    b.pwconv(-1, 16, Activation::None, "pw");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 2);
    PlanOptions opt;
    opt.target_ratio = 0.0;
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);

    const HardwareConfig cfg = one_core();
    const ScheduleTrace trace = schedule_pipeline(g, plan, cfg);
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.makespan == trace.records[0].counts.cycles);
}

TEST_CASE("schedule: DWConv overlaps the successor's SAT work") {
    // dw -> pw with every pw filter on SAT: the SAT record may start once
    // the first DW tile is out, so the makespan beats the serial sum while
    // still covering the longer stage
    GraphBuilder b("chain", 32, 16, 16);
    const int dw = b.dwconv(-1, 3, 1, Activation::ReLU, "dw");
    b.pwconv(dw, 32, Activation::None, "pw");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 8);
    PlanOptions opt;
    opt.target_ratio = 1.0;  // all filters APoT -> SAT
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);

    const HardwareConfig cfg = one_core();
    const ScheduleTrace pipe = schedule_pipeline(g, plan, cfg);
    ScheduleOptions off;
    off.pipeline = false;
    const ScheduleTrace serial = schedule_pipeline(g, plan, cfg, off);

    int64_t sum = 0, longest = 0;
    for (const auto& r : pipe.records) {
        sum += r.counts.cycles;
        longest = std::max(longest, r.counts.cycles);
    }
    CHECK(serial.makespan == sum);
    CHECK(pipe.makespan < serial.makespan);
    CHECK(pipe.makespan >= longest);
}

TEST_CASE("schedule: split layers run their engine halves concurrently") {
    GraphBuilder b("split", 36, 8, 8);
    b.pwconv(-1, 32, Activation::None, "pw");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 4);
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), {});  // 1:1 split

    const ScheduleTrace trace = schedule_pipeline(g, plan, one_core());
    REQUIRE(trace.records.size() == 2);
    CHECK(trace.records[0].start == trace.records[1].start);
    CHECK(trace.makespan == std::max(trace.records[0].end, trace.records[1].end));
}

TEST_CASE("pipeline bounds and work conservation on random graphs") {
    for (uint64_t seed = 1; seed <= 30; ++seed) {
        SplitMix64 rng(seed * 17);
        GraphBuilder b("rand", 8, 16, 16);
        int x = -1;
        const int blocks = 2 + static_cast<int>(rng.next() % 3);
        for (int i = 0; i < blocks; ++i) {
            const int64_t width = 8 * (1 + static_cast<int64_t>(rng.next() % 3));
            x = b.mbconv(x, width, i == 0 ? 2 : 1, 2, "mb" + std::to_string(i));
            if (rng.next() % 2 == 0 && width % 4 == 0)
                x = b.attention_block(x, 4, "attn" + std::to_string(i));
        }
        const NetworkGraph g = b.take();
        REQUIRE(validate_graph(g).empty());
        const WeightStore w = synthesize_weights(g, seed);
        PlanOptions opt;
        opt.target_ratio = 0.25 * static_cast<double>(rng.next() % 5);
        const QuantPlan plan = assign_m2q(g, w, flat_stats(g), opt);

        HardwareConfig cfg = HardwareConfig::defaults();
        cfg.L = 1 << (rng.next() % 5);
        const ScheduleTrace trace = schedule_pipeline(g, plan, cfg);

        // work conservation: every MAC simulated exactly once
        CHECK(trace.total_macs == g.total_macs());

        // bounds: busiest engine <= makespan <= serial sum
        int64_t sum = 0;
        CHECK(trace.mpma_busy <= trace.makespan);
        CHECK(trace.sat_busy <= trace.makespan);
        for (const auto& r : trace.records) sum += r.counts.cycles;
        CHECK(trace.makespan <= sum);

        // records on the same engine never overlap
        int64_t mpma_end = -1, sat_end = -1;
        for (const auto& r : trace.records) {
            int64_t& prev = r.engine == EngineKind::SAT ? sat_end : mpma_end;
            CHECK(r.start >= prev);
            prev = r.end;
        }

        // serialized schedule is the exact sum
        ScheduleOptions off;
        off.pipeline = false;
        CHECK(schedule_pipeline(g, plan, cfg, off).makespan == sum);
    }
}

TEST_CASE("makespan never grows when any parallelism factor grows") {
    GraphBuilder b("mono", 8, 16, 16);
    int x = b.mbconv(-1, 16, 2, 2, "mb0");
    x = b.attention_block(x, 4, "attn");
    b.mbconv(x, 16, 1, 2, "mb1");
    const NetworkGraph g = b.take();
    const WeightStore w = synthesize_weights(g, 6);
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), {});

    const HardwareConfig base = HardwareConfig::defaults();
    const int64_t base_span = schedule_pipeline(g, plan, base).makespan;

    for (int param = 0; param < 6; ++param) {
        HardwareConfig cfg = base;
        switch (param) {
            case 0: cfg.R *= 2; break;
            case 1: cfg.M *= 2; break;
            case 2: cfg.T *= 2; break;
            case 3: cfg.N *= 2; break;
            case 4: cfg.S_tiles *= 2; break;
            case 5: cfg.L *= 2; break;
        }
        CHECK(schedule_pipeline(g, plan, cfg).makespan <= base_span);
    }
}

TEST_CASE("cost report identities") {
    const NetworkGraph g = build_efficientvit(Variant::B1, 224);
    const WeightStore w = synthesize_weights(g, 5);
    const QuantPlan plan = assign_m2q(g, w, flat_stats(g), {});
    const HardwareConfig cfg = HardwareConfig::defaults();
    const ScheduleTrace trace = schedule_pipeline(g, plan, cfg);
    const CostReport rep = cost_report(trace, g, cfg);

    CHECK(rep.edp == rep.energy * rep.latency_s);
    CHECK(rep.throughput_gops ==
          2.0 * static_cast<double>(rep.total_macs) / rep.latency_s / 1e9);
    CHECK(rep.energy == rep.energy_compute + rep.energy_weight_buf + rep.energy_act_buf);
    CHECK(rep.latency_s == static_cast<double>(trace.makespan) / cfg.frequency);

    // scaling every unit energy scales energy and edp linearly
    HardwareConfig scaled = cfg;
    scaled.unit_energy.e_mul_8x8 *= 3;
    scaled.unit_energy.e_mul_4x8 *= 3;
    scaled.unit_energy.e_shift_unit *= 3;
    scaled.unit_energy.e_buf_8bit *= 3;
    scaled.unit_energy.e_buf_4bit *= 3;
    scaled.unit_energy.e_buf_apot *= 3;
    scaled.unit_energy.e_act_buf *= 3;
    const CostReport rep3 = cost_report(trace, g, scaled);
    CHECK(rep3.energy == doctest::Approx(3.0 * rep.energy).epsilon(1e-12));
    CHECK(rep3.edp == doctest::Approx(3.0 * rep.edp).epsilon(1e-12));
    CHECK(rep3.latency_s == rep.latency_s);
}

TEST_CASE("empty graphs cost nothing") {
    NetworkGraph g;
    g.name = "empty";
    g.input_channels = 1;
    g.input_h = g.input_w = 1;
    QuantPlan plan;
    const HardwareConfig cfg = HardwareConfig::defaults();
    const ScheduleTrace trace = schedule_pipeline(g, plan, cfg);
    const CostReport rep = cost_report(trace, g, cfg);
    CHECK(rep.latency_s == 0.0);
    CHECK(rep.energy == 0.0);
    CHECK(rep.edp == 0.0);
    CHECK(rep.throughput_gops == 0.0);
}

TEST_CASE("default configuration peaks at 2304 GOPS") {
    const HardwareConfig cfg = HardwareConfig::defaults();
    CHECK(peak_gops(cfg) == 2304.0);
    CHECK(cfg.mpma_merged_lanes() == 72);
    CHECK(cfg.sat_lanes() == 72);
}

TEST_CASE("hardware config validation") {
    HardwareConfig cfg = HardwareConfig::defaults();
    cfg.T = 15;  // merged mode needs pairs
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = HardwareConfig::defaults();
    cfg.L = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("buffer access energy is width-proportional") {
    const UnitEnergyTable t = UnitEnergyTable::defaults(500e6);
    CHECK(t.weight_buf_energy(4) == 0.5 * t.weight_buf_energy(8));
    CHECK(t.weight_buf_energy(5) == doctest::Approx(0.625 * t.weight_buf_energy(8)));
    CHECK(t.weight_buf_energy(5) == t.e_buf_apot);
    CHECK(t.e_mul_4x8 == 0.5 * t.e_mul_8x8);
}

TEST_CASE("hardware config round-trips through JSON") {
    HardwareConfig cfg = HardwareConfig::defaults();
    cfg.T = 32;
    cfg.L = 4;
    cfg.unit_energy.e_shift_unit *= 2;
    const auto path =
        (std::filesystem::temp_directory_path() / "m2q_hw_test.json").string();
    save_hardware_config(cfg, path);
    const HardwareConfig back = load_hardware_config(path);
    CHECK(back.T == 32);
    CHECK(back.L == 4);
    CHECK(back.unit_energy.e_shift_unit == cfg.unit_energy.e_shift_unit);
    CHECK(back.unit_energy.e_mul_8x8 == cfg.unit_energy.e_mul_8x8);
}
