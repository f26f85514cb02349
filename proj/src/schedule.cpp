// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/schedule.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace m2q {

using ordered_json = nlohmann::ordered_json;

const char* to_string(EngineKind e) {
    switch (e) {
        case EngineKind::MPMA_Single: return "mpma_single";
        case EngineKind::MPMA_Merged: return "mpma_merged";
        case EngineKind::SAT: return "sat";
    }
    return "?";
}

std::vector<EngineAssignment> build_engine_assignments(const NetworkGraph& graph,
                                                       const QuantPlan& plan) {
    std::vector<EngineAssignment> out;
    for (const auto& l : graph.layers) {
        if (!l.has_weights()) continue;
        EngineAssignment a;
        a.layer_id = l.id;
        const LayerPlan& lp = plan.at(l.id);
        if (l.kind == LayerKind::DWConv) {
            a.mpma_mode = EngineKind::MPMA_Single;
            a.mpma_filters = l.filters;
        } else if (!lp.quantized) {
            // fixed-weight MatMul (normalizer): costed like uniform filters
            a.mpma_mode = EngineKind::MPMA_Merged;
            a.mpma_filters = l.filters;
        } else {
            a.mpma_mode = EngineKind::MPMA_Merged;
            a.sat_filters = lp.apot_filter_count();
            a.mpma_filters = l.filters - a.sat_filters;
        }
        out.push_back(a);
    }
    return out;
}

namespace {

struct LayerReadiness {
    int64_t first_tile = 0;  // earliest cycle a consumer may start
    int64_t end = 0;         // all outputs complete
};

}  // namespace

ScheduleTrace schedule_pipeline(const NetworkGraph& graph, const QuantPlan& plan,
                                const HardwareConfig& cfg, const ScheduleOptions& opts) {
    cfg.validate();
    ScheduleTrace trace;

    std::unordered_map<int, LayerReadiness> ready;
    int64_t mpma_free = 0;
    int64_t sat_free = 0;
    int64_t serial_clock = 0;

    for (const auto& l : graph.layers) {
        // data readiness over producers (network input is ready at 0)
        int64_t dep_first = 0;
        int64_t dep_end = 0;
        for (int pid : l.producers) {
            auto it = ready.find(pid);
            if (it == ready.end())
                throw ExecError("layer " + std::to_string(l.id) + ": producer " +
                                std::to_string(pid) + " not scheduled yet (graph order)");
            dep_first = std::max(dep_first, it->second.first_tile);
            dep_end = std::max(dep_end, it->second.end);
        }

        if (!l.has_weights()) {
            // zero-cost glue: pass readiness through
            ready[l.id] = {dep_first, dep_end};
            continue;
        }

        const LayerPlan& lp = plan.at(l.id);
        std::vector<std::pair<EngineKind, LayerEngineCounts>> work;
        if (l.kind == LayerKind::DWConv) {
            work.emplace_back(EngineKind::MPMA_Single,
                              cycles_mpma_single(l, cfg, lp.weight_bits));
        } else {
            const int64_t sat_f = lp.quantized ? lp.apot_filter_count() : 0;
            const int64_t mpma_f = l.filters - sat_f;
            if (mpma_f > 0)
                work.emplace_back(EngineKind::MPMA_Merged, cycles_mpma_merged(l, mpma_f, cfg));
            if (sat_f > 0) work.emplace_back(EngineKind::SAT, cycles_sat(l, sat_f, cfg));
        }

        LayerReadiness own{INT64_MAX, 0};
        for (auto& [engine, counts] : work) {
            ScheduleRecord rec;
            rec.layer_id = l.id;
            rec.engine = engine;
            rec.counts = counts;
            rec.n_tiles = counts.n_tiles;
            const int64_t w = counts.cycles;
            const int64_t tile = ceil_div(w, rec.n_tiles);

            int64_t& engine_free = engine == EngineKind::SAT ? sat_free : mpma_free;
            if (opts.pipeline) {
                rec.start = std::max(engine_free, dep_first);
                rec.end = std::max(rec.start + w, dep_end + tile);
            } else {
                rec.start = serial_clock;
                rec.end = rec.start + w;
                serial_clock = rec.end;
            }
            engine_free = rec.end;

            own.first_tile = std::min(own.first_tile, rec.start + tile);
            own.end = std::max(own.end, rec.end);
            trace.records.push_back(rec);
        }
        // a consumer's first input tile carries filters from every record
        if (work.size() > 1) {
            int64_t first = 0;
            for (auto it = trace.records.end() - static_cast<long>(work.size());
                 it != trace.records.end(); ++it)
                first = std::max(first, it->start + ceil_div(it->counts.cycles, it->n_tiles));
            own.first_tile = first;
        }
        if (work.empty()) own = {dep_first, dep_end};
        ready[l.id] = own;
    }

    for (const auto& r : trace.records) {
        trace.makespan = std::max(trace.makespan, r.end);
        trace.total_macs += r.counts.macs + r.counts.su_ops;
        if (r.engine == EngineKind::SAT)
            trace.sat_busy += r.counts.cycles;
        else
            trace.mpma_busy += r.counts.cycles;
    }
    return trace;
}

CostReport cost_report(const ScheduleTrace& trace, const NetworkGraph& graph,
                       const HardwareConfig& cfg) {
    (void)graph;
    const UnitEnergyTable& e = cfg.unit_energy;
    CostReport rep;
    rep.makespan_cycles = trace.makespan;
    rep.total_macs = trace.total_macs;
    rep.peak_gops = peak_gops(cfg);

    for (const auto& r : trace.records) {
        double compute = 0;
        if (r.engine == EngineKind::MPMA_Single)
            compute = static_cast<double>(r.counts.macs) *
                      (r.counts.weight_bits <= 4 ? e.e_mul_4x8 : e.e_mul_8x8);
        else if (r.engine == EngineKind::MPMA_Merged)
            compute = static_cast<double>(r.counts.macs) * e.e_mul_8x8;
        else
            compute = static_cast<double>(r.counts.su_ops) * e.e_shift_unit;
        rep.energy_compute += compute;
        rep.energy_weight_buf += static_cast<double>(r.counts.weight_reads) *
                                 (r.counts.weight_bits > 0
                                      ? e.weight_buf_energy(r.counts.weight_bits)
                                      : 0.0);
        rep.energy_act_buf +=
            static_cast<double>(r.counts.act_reads + r.counts.act_writes) * e.e_act_buf;
    }
    rep.energy = rep.energy_compute + rep.energy_weight_buf + rep.energy_act_buf;
    rep.latency_s = static_cast<double>(trace.makespan) / cfg.frequency;
    const double ops = 2.0 * static_cast<double>(trace.total_macs);
    rep.throughput_gops = rep.latency_s > 0 ? ops / rep.latency_s / 1e9 : 0.0;
    rep.energy_efficiency = rep.energy > 0 ? ops / rep.energy : 0.0;
    rep.edp = rep.energy * rep.latency_s;
    return rep;
}

double dw_weight_buffer_energy(const ScheduleTrace& trace, const NetworkGraph& graph,
                               const HardwareConfig& cfg) {
    double acc = 0;
    for (const auto& r : trace.records) {
        const LayerSpec* l = graph.find(r.layer_id);
        if (!l || l->kind != LayerKind::DWConv) continue;
        acc += static_cast<double>(r.counts.weight_reads) *
               cfg.unit_energy.weight_buf_energy(r.counts.weight_bits);
    }
    return acc;
}

void save_trace_csv(const ScheduleTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write trace: " + path);
    out << "layer_id,engine,start_cycle,end_cycle,cycles,macs,su_ops,"
           "weight_reads,weight_bits,act_reads,act_writes\n";
    for (const auto& r : trace.records) {
        out << r.layer_id << ',' << to_string(r.engine) << ',' << r.start << ','
            << r.end << ',' << r.counts.cycles << ',' << r.counts.macs << ','
            << r.counts.su_ops << ',' << r.counts.weight_reads << ','
            << r.counts.weight_bits << ',' << r.counts.act_reads << ','
            << r.counts.act_writes << '\n';
    }
}

void save_trace_json(const ScheduleTrace& trace, const std::string& path) {
    ordered_json j;
    j["makespan_cycles"] = trace.makespan;
    j["total_macs"] = trace.total_macs;
    j["mpma_busy_cycles"] = trace.mpma_busy;
    j["sat_busy_cycles"] = trace.sat_busy;
    j["records"] = ordered_json::array();
    for (const auto& r : trace.records) {
        j["records"].push_back({{"layer_id", r.layer_id},
                                {"engine", to_string(r.engine)},
                                {"start_cycle", r.start},
                                {"end_cycle", r.end},
                                {"cycles", r.counts.cycles},
                                {"macs", r.counts.macs},
                                {"su_ops", r.counts.su_ops},
                                {"weight_reads", r.counts.weight_reads},
                                {"weight_bits", r.counts.weight_bits},
                                {"act_reads", r.counts.act_reads},
                                {"act_writes", r.counts.act_writes}});
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write trace: " + path);
    out << j.dump(2) << "\n";
}

namespace {

ordered_json report_json(const CostReport& r) {
    return {{"latency_ms", r.latency_s * 1e3},
            {"energy", r.energy},
            {"energy_compute", r.energy_compute},
            {"energy_weight_buf", r.energy_weight_buf},
            {"energy_act_buf", r.energy_act_buf},
            {"throughput_gops", r.throughput_gops},
            {"energy_efficiency", r.energy_efficiency},
            {"edp", r.edp},
            {"peak_gops", r.peak_gops},
            {"makespan_cycles", r.makespan_cycles},
            {"total_macs", r.total_macs}};
}

}  // namespace

void save_report_json(const CostReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write report: " + path);
    out << report_json(report).dump(2) << "\n";
}

void save_report_csv(const CostReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write report: " + path);
    const ordered_json j = report_json(report);
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
        out << (first ? "" : ",") << it.key();
        first = false;
    }
    out << "\n";
    first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
        out << (first ? "" : ",") << it.value().dump();
        first = false;
    }
    out << "\n";
}

}  // namespace m2q
