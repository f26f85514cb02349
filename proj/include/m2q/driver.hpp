// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m2q/builders.hpp"
#include "m2q/exec.hpp"
#include "m2q/model_io.hpp"
#include "m2q/plan.hpp"
#include "m2q/schedule.hpp"

namespace m2q {

// One CLI invocation's worth of options. A fixed seed makes every
// produced artifact byte-identical across runs.
struct RunConfig {
    std::string model_path;  // empty: use the builder spec below
    Variant variant = Variant::B1;
    int resolution = 224;

    double ratio = 0.5;  // APoT fraction
    int dw_bits = 4;
    RatioScope scope = RatioScope::PerLayer;

    std::string hw_config_path;  // empty: defaults
    std::string plan_path;       // simulate: reuse an existing plan file
    uint64_t seed = 1;
    int calib_samples = 4;

    std::string out_dir = "out";
    bool emit_json = true;
    bool emit_csv = true;
    bool pipeline = true;
};

struct ModelContext {
    NetworkGraph graph;
    WeightStore weights;
    ActivationStats stats;
};

// Loads or builds the model, synthesizes weights when the manifest has no
// blob, and runs seeded float calibration. Callers that only schedule an
// existing plan can skip the calibration runs.
ModelContext prepare_model(const RunConfig& run, bool with_stats = true);

HardwareConfig resolve_hardware(const RunConfig& run);

QuantPlan make_plan(const ModelContext& ctx, const RunConfig& run, double ratio,
                    int dw_bits);

struct QuantizeResult {
    QuantPlan plan;
    std::vector<LayerError> errors;
    std::string plan_file;
    std::string errors_file;
};
QuantizeResult cmd_quantize(const RunConfig& run);

struct SimulateResult {
    CostReport report;
    ScheduleTrace trace;
    std::vector<std::string> files;
};
SimulateResult cmd_simulate(const RunConfig& run);

struct SweepPoint {
    double setting = 0;
    double error_mse = 0;  // end-to-end output MSE vs float reference
    CostReport report;
};
struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    std::string csv_file;
};
// axis: dw_bits | ratio | cores | tiles. Empty point list selects the
// default range for the axis.
SweepResult cmd_sweep(const RunConfig& run, const std::string& axis,
                      std::vector<double> points = {});

struct CompareResult {
    CostReport mixed;
    CostReport uniform;
    double compute_energy_ratio = 0;
    double energy_ratio = 0;
    double latency_ratio = 0;
    double edp_ratio = 0;
    std::string file;
};
// Mixed plan (run.ratio, run.dw_bits) against the uniform-8-bit baseline
// (ratio 0, 8-bit DWConvs) on the same model and hardware.
CompareResult cmd_compare(const RunConfig& run);

// Returns the violations (empty = valid).
std::vector<Violation> cmd_validate(const RunConfig& run);

// Table-style summary of a report, row names matching the usual
// accelerator comparison tables.
std::string format_report_table(const CostReport& report, const std::string& label);

}  // namespace m2q
