// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/driver.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace m2q {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::vector<double>> calibration_inputs(const NetworkGraph& graph,
                                                    uint64_t seed, int count) {
    std::vector<std::vector<double>> inputs;
    inputs.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        inputs.push_back(synthesize_input(graph, derive_seed(seed, 0xca11b, i)));
    return inputs;
}

std::vector<double> probe_input(const NetworkGraph& graph, uint64_t seed) {
    return synthesize_input(graph, derive_seed(seed, 0x9b0be));
}

std::string out_path(const RunConfig& run, const std::string& file) {
    fs::create_directories(run.out_dir);
    return (fs::path(run.out_dir) / file).string();
}

double final_output_mse(const RunResult& res) {
    return res.errors.empty() ? 0.0 : res.errors.back().mse;
}

}  // namespace

ModelContext prepare_model(const RunConfig& run, bool with_stats) {
    ModelContext ctx;
    if (!run.model_path.empty()) {
        LoadedModel m = load_model(run.model_path);
        ctx.graph = std::move(m.graph);
        ctx.weights = m.weights ? std::move(*m.weights)
                                : synthesize_weights(ctx.graph, run.seed);
    } else {
        ctx.graph = build_efficientvit(run.variant, run.resolution);
        ctx.weights = synthesize_weights(ctx.graph, run.seed);
    }
    const auto violations = validate_graph(ctx.graph);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "model has " << violations.size() << " violation(s); first: layer "
           << violations[0].layer_id << " [" << violations[0].code << "] "
           << violations[0].message;
        throw ConfigError(os.str());
    }
    if (with_stats) {
        const auto inputs = calibration_inputs(ctx.graph, run.seed, run.calib_samples);
        ctx.stats = collect_activation_stats(ctx.graph, ctx.weights, inputs);
    }
    return ctx;
}

HardwareConfig resolve_hardware(const RunConfig& run) {
    if (run.hw_config_path.empty()) return HardwareConfig::defaults();
    return load_hardware_config(run.hw_config_path);
}

QuantPlan make_plan(const ModelContext& ctx, const RunConfig& run, double ratio,
                    int dw_bits) {
    PlanOptions opt;
    opt.target_ratio = ratio;
    opt.dw_bits = dw_bits;
    opt.scope = run.scope;
    return assign_m2q(ctx.graph, ctx.weights, ctx.stats, opt);
}

QuantizeResult cmd_quantize(const RunConfig& run) {
    const ModelContext ctx = prepare_model(run);
    QuantizeResult result;
    result.plan = make_plan(ctx, run, run.ratio, run.dw_bits);

    result.plan_file = out_path(run, "plan.json");
    save_plan(result.plan, result.plan_file);

    const RunResult probe =
        run_network(ctx.graph, ctx.weights, result.plan, probe_input(ctx.graph, run.seed));
    result.errors = probe.errors;

    ordered_json ej = ordered_json::array();
    for (const auto& e : result.errors)
        ej.push_back({{"layer_id", e.layer_id}, {"mse", e.mse}, {"max_abs", e.max_abs}});
    result.errors_file = out_path(run, "layer_errors.json");
    std::ofstream out(result.errors_file);
    out << ej.dump(2) << "\n";
    return result;
}

SimulateResult cmd_simulate(const RunConfig& run) {
    const bool derive_plan = run.plan_path.empty();
    const ModelContext ctx = prepare_model(run, /*with_stats=*/derive_plan);
    const HardwareConfig cfg = resolve_hardware(run);
    const QuantPlan plan = derive_plan ? make_plan(ctx, run, run.ratio, run.dw_bits)
                                       : load_plan(run.plan_path);

    ScheduleOptions opts;
    opts.pipeline = run.pipeline;
    SimulateResult result;
    result.trace = schedule_pipeline(ctx.graph, plan, cfg, opts);
    result.report = cost_report(result.trace, ctx.graph, cfg);

    if (run.emit_json) {
        const std::string rj = out_path(run, "report.json");
        save_report_json(result.report, rj);
        result.files.push_back(rj);
        const std::string tj = out_path(run, "trace.json");
        save_trace_json(result.trace, tj);
        result.files.push_back(tj);
    }
    if (run.emit_csv) {
        const std::string rc = out_path(run, "report.csv");
        save_report_csv(result.report, rc);
        result.files.push_back(rc);
        const std::string tc = out_path(run, "trace.csv");
        save_trace_csv(result.trace, tc);
        result.files.push_back(tc);
    }
    return result;
}

SweepResult cmd_sweep(const RunConfig& run, const std::string& axis,
                      std::vector<double> points) {
    if (axis != "dw_bits" && axis != "ratio" && axis != "cores" && axis != "tiles")
        throw ConfigError("unknown sweep axis: " + axis);
    if (points.empty()) {
        if (axis == "dw_bits") points = {3, 4, 5, 6, 7, 8};
        else if (axis == "ratio") points = {0.0, 0.25, 0.5, 0.75, 1.0};
        else if (axis == "cores") points = {1, 2, 4, 8, 16};
        else points = {4, 8, 16, 32};
    }
    if (points.empty()) throw ConfigError("sweep axis has no points");

    const ModelContext ctx = prepare_model(run);
    const HardwareConfig base_cfg = resolve_hardware(run);
    ScheduleOptions opts;
    opts.pipeline = run.pipeline;

    SweepResult result;
    result.axis = axis;
    const std::vector<double> probe = probe_input(ctx.graph, run.seed);
    const auto reference = run_float_reference(ctx.graph, ctx.weights, probe);

    // error proxy is hardware-independent; compute once for hw axes
    double hw_axis_error = -1.0;

    for (double setting : points) {
        SweepPoint pt;
        pt.setting = setting;
        HardwareConfig cfg = base_cfg;
        double ratio = run.ratio;
        int dw_bits = run.dw_bits;

        if (axis == "dw_bits") dw_bits = static_cast<int>(setting);
        else if (axis == "ratio") ratio = setting;
        else if (axis == "cores") cfg.L = static_cast<int>(setting);
        else cfg.T = static_cast<int>(setting);
        cfg.validate();

        const QuantPlan plan = make_plan(ctx, run, ratio, dw_bits);
        if (axis == "dw_bits") {
            // isolate the swept width from the fixed 8-bit noise of the
            // other tensors (the bit-width ablation protocol)
            pt.error_mse =
                dw_weight_ablation_mse(ctx.graph, ctx.weights, dw_bits, probe, reference);
        } else if (axis == "ratio") {
            pt.error_mse = final_output_mse(
                run_network_with_reference(ctx.graph, ctx.weights, plan, probe, reference));
        } else {
            if (hw_axis_error < 0)
                hw_axis_error = final_output_mse(run_network_with_reference(
                    ctx.graph, ctx.weights, plan, probe, reference));
            pt.error_mse = hw_axis_error;
        }
        pt.report = cost_report(schedule_pipeline(ctx.graph, plan, cfg, opts), ctx.graph, cfg);
        result.points.push_back(pt);
    }

    result.csv_file = out_path(run, "sweep_" + axis + ".csv");
    std::ofstream out(result.csv_file);
    if (!out) throw ParseError("cannot write sweep: " + result.csv_file);
    out << "axis,setting,error_mse,latency_ms,energy,energy_compute,edp,"
           "throughput_gops\n";
    for (const auto& pt : result.points) {
        const auto& r = pt.report;
        out << axis << ',' << pt.setting << ',' << pt.error_mse << ','
            << r.latency_s * 1e3 << ',' << r.energy << ',' << r.energy_compute << ','
            << r.edp << ',' << r.throughput_gops << '\n';
    }
    return result;
}

CompareResult cmd_compare(const RunConfig& run) {
    const ModelContext ctx = prepare_model(run);
    const HardwareConfig cfg = resolve_hardware(run);
    ScheduleOptions opts;
    opts.pipeline = run.pipeline;

    const QuantPlan mixed = make_plan(ctx, run, run.ratio, run.dw_bits);
    const QuantPlan uniform = make_plan(ctx, run, 0.0, 8);

    CompareResult result;
    result.mixed = cost_report(schedule_pipeline(ctx.graph, mixed, cfg, opts), ctx.graph, cfg);
    result.uniform =
        cost_report(schedule_pipeline(ctx.graph, uniform, cfg, opts), ctx.graph, cfg);

    auto ratio = [](double a, double b) { return b != 0 ? a / b : 0.0; };
    result.compute_energy_ratio =
        ratio(result.mixed.energy_compute, result.uniform.energy_compute);
    result.energy_ratio = ratio(result.mixed.energy, result.uniform.energy);
    result.latency_ratio = ratio(result.mixed.latency_s, result.uniform.latency_s);
    result.edp_ratio = ratio(result.mixed.edp, result.uniform.edp);

    ordered_json j;
    j["model"] = ctx.graph.name;
    auto rep = [](const CostReport& r) {
        return ordered_json{{"latency_ms", r.latency_s * 1e3},
                            {"energy", r.energy},
                            {"energy_compute", r.energy_compute},
                            {"edp", r.edp},
                            {"throughput_gops", r.throughput_gops}};
    };
    j["mixed"] = rep(result.mixed);
    j["uniform8"] = rep(result.uniform);
    j["ratios"] = {{"compute_energy", result.compute_energy_ratio},
                   {"energy", result.energy_ratio},
                   {"latency", result.latency_ratio},
                   {"edp", result.edp_ratio}};
    result.file = out_path(run, "compare.json");
    std::ofstream out(result.file);
    out << j.dump(2) << "\n";
    return result;
}

std::vector<Violation> cmd_validate(const RunConfig& run) {
    if (!run.model_path.empty()) {
        LoadedModel m = load_model(run.model_path);
        return validate_graph(m.graph);
    }
    return validate_graph(build_efficientvit(run.variant, run.resolution));
}

std::string format_report_table(const CostReport& r, const std::string& label) {
    std::ostringstream os;
    char buf[128];
    os << "=== " << label << " ===\n";
    auto row = [&](const char* name, double v, const char* fmt) {
        std::snprintf(buf, sizeof(buf), fmt, v);
        os << "  " << name;
        for (size_t i = std::strlen(name); i < 28; ++i) os << ' ';
        os << buf << "\n";
    };
    row("MACs (G)", static_cast<double>(r.total_macs) / 1e9, "%.4f");
    row("Peak Throughput (GOPS)", r.peak_gops, "%.1f");
    row("Throughput (GOPS)", r.throughput_gops, "%.1f");
    row("Latency (ms)", r.latency_s * 1e3, "%.4f");
    row("Energy (rel. units)", r.energy, "%.6e");
    row("  compute", r.energy_compute, "%.6e");
    row("  weight buffer", r.energy_weight_buf, "%.6e");
    row("  activation buffer", r.energy_act_buf, "%.6e");
    row("Energy Eff. (ops/unit)", r.energy_efficiency, "%.4e");
    row("EDP (units*s)", r.edp, "%.6e");
    return os.str();
}

}  // namespace m2q
