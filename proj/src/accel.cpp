// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/accel.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace m2q {

using ordered_json = nlohmann::ordered_json;

namespace {

// synthesis-derived dynamic powers (relative units)
constexpr double kMergedMulPower = 2.54e-2;  // precision-scalable pair
constexpr double kShiftUnitPower = 1.06e-2;
constexpr double kWeightBufPower = 18.0256;  // 8-bit weight buffer bank
constexpr double kActBufPower = 8.5676;      // activation buffer bank
// buffer bank power is normalized over the datapath lanes it feeds
constexpr double kDatapathLanes = 144.0;

}  // namespace

UnitEnergyTable UnitEnergyTable::defaults(double frequency_hz) {
    UnitEnergyTable t;
    t.e_mul_8x8 = kMergedMulPower / frequency_hz;
    t.e_mul_4x8 = t.e_mul_8x8 / 2.0;  // one half of the merged pair
    t.e_shift_unit = kShiftUnitPower / frequency_hz;
    t.e_buf_8bit = kWeightBufPower / (frequency_hz * kDatapathLanes);
    t.e_buf_4bit = t.e_buf_8bit * 4.0 / 8.0;
    t.e_buf_apot = t.e_buf_8bit * 5.0 / 8.0;
    t.e_act_buf = kActBufPower / (frequency_hz * kDatapathLanes);
    return t;
}

double UnitEnergyTable::weight_buf_energy(int bits) const {
    switch (bits) {
        case 8: return e_buf_8bit;
        case 5: return e_buf_apot;
        case 4: return e_buf_4bit;
        default: return e_buf_8bit * static_cast<double>(bits) / 8.0;
    }
}

HardwareConfig HardwareConfig::defaults() {
    HardwareConfig cfg;
    cfg.unit_energy = UnitEnergyTable::defaults(cfg.frequency);
    return cfg;
}

void HardwareConfig::validate() const {
    if (R < 1 || M < 1 || T < 1 || N < 1 || S_tiles < 1 || L < 1)
        throw ConfigError("hardware config: all parallelism factors must be positive");
    if (T % 2 != 0) throw ConfigError("hardware config: T must be even (merged mode pairs tiles)");
    if (frequency <= 0) throw ConfigError("hardware config: frequency must be positive");
}

double peak_gops(const HardwareConfig& cfg) {
    const double macs_per_cycle =
        static_cast<double>(cfg.mpma_merged_lanes() + cfg.sat_lanes());
    return macs_per_cycle * cfg.L * 2.0 * cfg.frequency / 1e9;
}

HardwareConfig load_hardware_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open hardware config: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid JSON: " + std::string(e.what()));
    }
    HardwareConfig cfg;
    cfg.R = j.value("R", cfg.R);
    cfg.M = j.value("M", cfg.M);
    cfg.T = j.value("T", cfg.T);
    cfg.N = j.value("N", cfg.N);
    cfg.S_tiles = j.value("S_tiles", cfg.S_tiles);
    cfg.L = j.value("L", cfg.L);
    cfg.frequency = j.value("frequency_hz", cfg.frequency);
    cfg.unit_energy = UnitEnergyTable::defaults(cfg.frequency);
    if (j.contains("unit_energy")) {
        const auto& e = j.at("unit_energy");
        auto& t = cfg.unit_energy;
        t.e_mul_8x8 = e.value("e_mul_8x8", t.e_mul_8x8);
        t.e_mul_4x8 = e.value("e_mul_4x8", t.e_mul_4x8);
        t.e_shift_unit = e.value("e_shift_unit", t.e_shift_unit);
        t.e_buf_8bit = e.value("e_buf_8bit", t.e_buf_8bit);
        t.e_buf_4bit = e.value("e_buf_4bit", t.e_buf_4bit);
        t.e_buf_apot = e.value("e_buf_apot", t.e_buf_apot);
        t.e_act_buf = e.value("e_act_buf", t.e_act_buf);
    }
    cfg.validate();
    return cfg;
}

void save_hardware_config(const HardwareConfig& cfg, const std::string& path) {
    ordered_json j;
    j["R"] = cfg.R;
    j["M"] = cfg.M;
    j["T"] = cfg.T;
    j["N"] = cfg.N;
    j["S_tiles"] = cfg.S_tiles;
    j["L"] = cfg.L;
    j["frequency_hz"] = cfg.frequency;
    j["unit_energy"] = {{"e_mul_8x8", cfg.unit_energy.e_mul_8x8},
                        {"e_mul_4x8", cfg.unit_energy.e_mul_4x8},
                        {"e_shift_unit", cfg.unit_energy.e_shift_unit},
                        {"e_buf_8bit", cfg.unit_energy.e_buf_8bit},
                        {"e_buf_4bit", cfg.unit_energy.e_buf_4bit},
                        {"e_buf_apot", cfg.unit_energy.e_buf_apot},
                        {"e_act_buf", cfg.unit_energy.e_act_buf}};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write hardware config: " + path);
    out << j.dump(2) << "\n";
}

EngineDims engine_dims(const LayerSpec& layer) {
    EngineDims d;
    d.in_elems = layer.input.elements();
    switch (layer.kind) {
        case LayerKind::DWConv:
        case LayerKind::PWConv: {
            const Shape out = layer.output_shape();
            d.c_in = layer.input.channels();
            d.p_out = out.height() * out.width();
            d.out_elems_per_filter = d.p_out;
            break;
        }
        case LayerKind::MatMul:
            d.c_in = layer.input.cols() / layer.groups;
            d.p_out = layer.input.rows();
            d.out_elems_per_filter = d.p_out;
            break;
        case LayerKind::Elementwise:
            break;
    }
    return d;
}

namespace {

// Per-core cycles and pixel-step count under the two core-split choices;
// the controller takes whichever axis finishes sooner (pixel axis on ties).
struct AxisChoice {
    int64_t cycles = 0;
    int64_t pixel_steps = 1;
};

AxisChoice split_filters_parallel(int64_t c_steps, int64_t filters, int64_t f_lanes,
                                  int64_t p_out, const HardwareConfig& cfg) {
    const int64_t p_slice = ceil_div(p_out, cfg.L);
    AxisChoice pixel{c_steps * ceil_div(filters, f_lanes) * p_slice, p_slice};
    AxisChoice filter{c_steps * ceil_div(ceil_div(filters, cfg.L), f_lanes) * p_out,
                      p_out};
    return filter.cycles < pixel.cycles ? filter : pixel;
}

}  // namespace

LayerEngineCounts cycles_mpma_single(const LayerSpec& layer, const HardwareConfig& cfg,
                                     int dw_bits) {
    if (layer.kind != LayerKind::DWConv)
        throw ConfigError("cycles_mpma_single expects a DWConv layer");
    const EngineDims d = engine_dims(layer);
    const int64_t tp = dw_bits <= 4 ? cfg.T : cfg.T / 2;  // pixel parallelism
    const int64_t window = ceil_div(layer.kernel_h, cfg.R) * layer.kernel_w;

    // split either the output-pixel loop or the channel loop across cores
    const int64_t p_slice = ceil_div(d.p_out, cfg.L);
    AxisChoice pixel{ceil_div(d.c_in, cfg.M) * ceil_div(p_slice, tp) * window,
                     ceil_div(p_slice, tp)};
    AxisChoice channel{ceil_div(ceil_div(d.c_in, cfg.L), cfg.M) *
                           ceil_div(d.p_out, tp) * window,
                       ceil_div(d.p_out, tp)};
    const AxisChoice best = channel.cycles < pixel.cycles ? channel : pixel;

    LayerEngineCounts c;
    c.cycles = best.cycles;
    c.n_tiles = std::max<int64_t>(best.pixel_steps, 1);
    c.macs = layer.mac_count();
    c.weight_reads = layer.weight_count();
    c.weight_bits = dw_bits;
    c.act_reads = d.in_elems;
    c.act_writes = d.p_out * layer.filters;
    return c;
}

LayerEngineCounts cycles_mpma_merged(const LayerSpec& layer, int64_t filters_uniform,
                                     const HardwareConfig& cfg) {
    if (layer.kind != LayerKind::PWConv && layer.kind != LayerKind::MatMul)
        throw ConfigError("cycles_mpma_merged expects a PWConv or MatMul layer");
    if (cfg.T % 2 != 0 || cfg.T < 2)
        throw ConfigError("merged mode pairs adjacent tiles: T must be even");
    LayerEngineCounts c;
    if (filters_uniform == 0) return c;
    const EngineDims d = engine_dims(layer);
    const int64_t lanes = int64_t{cfg.R} * cfg.M;
    const AxisChoice best = split_filters_parallel(
        ceil_div(d.c_in, lanes), filters_uniform, cfg.T / 2, d.p_out, cfg);
    c.cycles = best.cycles;
    c.n_tiles = std::max<int64_t>(best.pixel_steps, 1);
    c.macs = filters_uniform * d.c_in * d.p_out;
    c.weight_reads = filters_uniform * d.c_in;
    c.weight_bits = 8;
    c.act_reads = d.in_elems;
    c.act_writes = filters_uniform * d.out_elems_per_filter;
    return c;
}

LayerEngineCounts cycles_sat(const LayerSpec& layer, int64_t filters_apot,
                             const HardwareConfig& cfg) {
    if (layer.kind != LayerKind::PWConv && layer.kind != LayerKind::MatMul)
        throw ConfigError("cycles_sat expects a PWConv or MatMul layer");
    LayerEngineCounts c;
    if (filters_apot == 0) return c;
    const EngineDims d = engine_dims(layer);
    const AxisChoice best = split_filters_parallel(ceil_div(d.c_in, cfg.N), filters_apot,
                                                   cfg.S_tiles, d.p_out, cfg);
    c.cycles = best.cycles;
    c.n_tiles = std::max<int64_t>(best.pixel_steps, 1);
    c.su_ops = filters_apot * d.c_in * d.p_out;
    c.weight_reads = filters_apot * d.c_in;
    c.weight_bits = 5;
    c.act_reads = d.in_elems;
    c.act_writes = filters_apot * d.out_elems_per_filter;
    return c;
}

}  // namespace m2q
