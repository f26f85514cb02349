// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

//
// Cycle and access-count model of the heterogeneous accelerator.
//
// One computing core holds a Mixed-Precision Multiplication Array (MPMA:
// T tiles x M blocks x R 4x8-bit multipliers) and a Shifters-and-Adder-
// Tree engine (SAT: S_tiles tiles x N shifter units). L cores cooperate
// on one image by splitting the output-pixel/row loop; every other loop
// runs inside a core.
//
// Cycle model. Inside one core:
//   MPMA single (DWConv, output-parallel):
//     ceil(C/M) * ceil(P/Tp) * ceil(kh/R) * kw
//     Tp = T when weights fit 4 bits, else T/2 (multiplier pairs merge).
//     One kernel column per cycle; rows map to the R multipliers, channels
//     to blocks, adjacent output pixels to tiles.
//   MPMA merged (uniform PWConv/MatMul filters, filters-parallel):
//     ceil(C_in/(R*M)) * ceil(F_u/(T/2)) * P
//   SAT (APoT filters, filters-parallel):
//     ceil(C_in/N) * ceil(F_a/S_tiles) * P
// MatMuls use C_in = cols/groups and P_out = rows.
//
// The per-layer controller splits one loop axis across the L cores,
// whichever gives fewer cycles: the output-pixel loop (per-core
// P = ceil(P_out/L)) or the filter loop (channel loop for DWConvs,
// per-core F = ceil(F/L)). With L = 1 both collapse to the single-core
// formulas above.
//
// Access-count model: weights are fetched from the global weight buffer
// once per layer execution (one read per weight; broadcast and residency
// within a layer are credited). Each engine record reads its full input
// once (per-core re-streaming is served by the auxiliary buffer) and
// writes its own output elements once.
//
// Unit energies are relative units: dynamic power per unit divided by
// frequency. Buffer accesses are width-proportional against the 8-bit
// anchor, normalized per datapath lane.
//

#pragma once

#include <cstdint>
#include <string>

#include "m2q/netgraph.hpp"

namespace m2q {

struct UnitEnergyTable {
    double e_mul_8x8 = 0;     // merged-mode multiply
    double e_mul_4x8 = 0;     // single-mode multiply
    double e_shift_unit = 0;  // one SU op: two shifts + add
    double e_buf_8bit = 0;    // weight-buffer access, 8-bit word
    double e_buf_4bit = 0;
    double e_buf_apot = 0;    // 5-bit APoT word
    double e_act_buf = 0;     // activation-buffer access

    static UnitEnergyTable defaults(double frequency_hz);

    // width-proportional weight-buffer access energy
    double weight_buf_energy(int bits) const;
};

struct HardwareConfig {
    int R = 3;        // multipliers per PE block
    int M = 3;        // blocks per tile
    int T = 16;       // MPMA tiles (even; merged mode pairs them)
    int N = 9;        // shifter units per SAT tile
    int S_tiles = 8;  // SAT tiles
    int L = 16;       // computing cores
    double frequency = 500e6;
    UnitEnergyTable unit_energy;

    static HardwareConfig defaults();
    void validate() const;  // throws ConfigError

    int64_t mpma_merged_lanes() const { return int64_t{R} * M * (T / 2); }
    int64_t sat_lanes() const { return int64_t{N} * S_tiles; }
};

// theoretical peak, ops = 2 * MACs, both engines busy on all cores
double peak_gops(const HardwareConfig& cfg);

HardwareConfig load_hardware_config(const std::string& path);
void save_hardware_config(const HardwareConfig& cfg, const std::string& path);

// Per (layer, engine) work and access counts.
struct LayerEngineCounts {
    int64_t cycles = 0;
    int64_t macs = 0;     // multiplier MACs (single or merged)
    int64_t su_ops = 0;   // SAT shifter-unit ops (one per APoT MAC)
    int64_t weight_reads = 0;
    int weight_bits = 0;  // width of those reads; 0 = none
    int64_t act_reads = 0;
    int64_t act_writes = 0;
    // output-pixel steps of the chosen dataflow; the scheduler's tile
    // granularity for producer/consumer overlap
    int64_t n_tiles = 1;
};

// engine-facing dims of a layer
struct EngineDims {
    int64_t c_in = 0;    // reduction length per output (per group)
    int64_t p_out = 0;   // output pixels or rows
    int64_t in_elems = 0;
    int64_t out_elems_per_filter = 0;
};
EngineDims engine_dims(const LayerSpec& layer);

LayerEngineCounts cycles_mpma_single(const LayerSpec& layer, const HardwareConfig& cfg,
                                     int dw_bits);
LayerEngineCounts cycles_mpma_merged(const LayerSpec& layer, int64_t filters_uniform,
                                     const HardwareConfig& cfg);
LayerEngineCounts cycles_sat(const LayerSpec& layer, int64_t filters_apot,
                             const HardwareConfig& cfg);

}  // namespace m2q
