// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

//
// Pipelined schedule over the two physical engines (MPMA, SAT).
//
// Each weighted layer contributes up to two records: its uniform filters
// on MPMA (single mode for DWConvs, merged otherwise) and its APoT
// filters on SAT. Records stream output tiles; a consumer may start once
// every producer has finished its first tile and may not finish earlier
// than one of its own tiles after the last producer finishes:
//
//   start(r) = max(engine_free, max_p first_tile(p))
//   end(r)   = max(start(r) + W_r, max_p end(p) + ceil(W_r / n_tiles(r)))
//
// first_tile(p) = start(p) + ceil(W_p / n_tiles(p)). Elementwise layers
// cost nothing and pass readiness through. With pipelining disabled,
// records run back to back and the makespan is the exact sum of record
// cycles.
//

#pragma once

#include <string>
#include <vector>

#include "m2q/accel.hpp"
#include "m2q/netgraph.hpp"
#include "m2q/plan.hpp"

namespace m2q {

enum class EngineKind { MPMA_Single, MPMA_Merged, SAT };

const char* to_string(EngineKind e);

// Filter partition of one layer across engines.
struct EngineAssignment {
    int layer_id = -1;
    EngineKind mpma_mode = EngineKind::MPMA_Merged;
    int64_t mpma_filters = 0;  // uniform filters (all filters for DWConv)
    int64_t sat_filters = 0;   // APoT filters
    bool split() const { return mpma_filters > 0 && sat_filters > 0; }
};

std::vector<EngineAssignment> build_engine_assignments(const NetworkGraph& graph,
                                                       const QuantPlan& plan);

struct ScheduleRecord {
    int layer_id = -1;
    EngineKind engine = EngineKind::MPMA_Merged;
    int64_t start = 0;
    int64_t end = 0;
    int64_t n_tiles = 1;
    LayerEngineCounts counts;
};

struct ScheduleTrace {
    std::vector<ScheduleRecord> records;
    int64_t makespan = 0;
    int64_t total_macs = 0;  // macs + su_ops over all records
    int64_t mpma_busy = 0;
    int64_t sat_busy = 0;
};

struct ScheduleOptions {
    bool pipeline = true;
};

ScheduleTrace schedule_pipeline(const NetworkGraph& graph, const QuantPlan& plan,
                                const HardwareConfig& cfg,
                                const ScheduleOptions& opts = {});

struct CostReport {
    double latency_s = 0;
    double energy = 0;  // relative units
    double energy_compute = 0;
    double energy_weight_buf = 0;
    double energy_act_buf = 0;
    double throughput_gops = 0;
    double energy_efficiency = 0;  // ops per relative energy unit
    double edp = 0;                // energy * latency
    double peak_gops = 0;
    int64_t makespan_cycles = 0;
    int64_t total_macs = 0;
};

CostReport cost_report(const ScheduleTrace& trace, const NetworkGraph& graph,
                       const HardwareConfig& cfg);

// weight-buffer energy attributed to DWConv layers only (bit-width studies)
double dw_weight_buffer_energy(const ScheduleTrace& trace, const NetworkGraph& graph,
                               const HardwareConfig& cfg);

void save_trace_csv(const ScheduleTrace& trace, const std::string& path);
void save_trace_json(const ScheduleTrace& trace, const std::string& path);
void save_report_json(const CostReport& report, const std::string& path);
void save_report_csv(const CostReport& report, const std::string& path);

}  // namespace m2q
