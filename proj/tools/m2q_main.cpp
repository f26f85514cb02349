// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "m2q/driver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void add_common(CLI::App* cmd, m2q::RunConfig& run, std::string& variant) {
    cmd->add_option("--model", run.model_path, "network manifest (JSON)");
    cmd->add_option("--builder", variant, "built-in variant: B1 or B2");
    cmd->add_option("--resolution", run.resolution, "input resolution (224/256/288)");
    cmd->add_option("--ratio", run.ratio, "APoT fraction of computation-intensive filters")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--dw-bits", run.dw_bits, "DWConv weight bits")->check(CLI::Range(3, 8));
    cmd->add_option("--hw-config", run.hw_config_path, "hardware config (JSON)");
    cmd->add_option("--seed", run.seed, "seed for weights/calibration synthesis");
    cmd->add_option("--calib", run.calib_samples, "calibration sample count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", run.out_dir, "output directory");
    cmd->add_option("--format", [&run](const std::vector<std::string>& vals) {
        run.emit_json = false;
        run.emit_csv = false;
        for (const auto& v : vals) {
            if (v == "json") run.emit_json = true;
            else if (v == "csv") run.emit_csv = true;
            else return false;
        }
        return true;
    }, "report formats: json, csv (repeatable)");
    cmd->add_flag("--no-pipeline", [&run](int64_t) { run.pipeline = false; },
                  "serialize engines (disable pipelined overlap)");
    cmd->add_option("--ratio-scope", [&run](const std::vector<std::string>& vals) {
        if (vals.empty()) return false;
        if (vals[0] == "layer") run.scope = m2q::RatioScope::PerLayer;
        else if (vals[0] == "network") run.scope = m2q::RatioScope::NetworkWide;
        else return false;
        return true;
    }, "APoT:uniform ratio enforcement: layer (default) or network");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-level mixed quantization and accelerator simulation for "
                 "Convolution-Transformer hybrid networks"};
    app.require_subcommand(1);

    m2q::RunConfig run;
    std::string variant = "B1";
    std::string sweep_axis = "dw_bits";
    std::vector<double> sweep_points;

    auto* quantize = app.add_subcommand("quantize", "derive and save a quantization plan");
    add_common(quantize, run, variant);

    auto* simulate = app.add_subcommand("simulate", "cycle-level simulation of a plan");
    add_common(simulate, run, variant);
    simulate->add_option("--plan", run.plan_path, "reuse an existing plan file");

    auto* sweep = app.add_subcommand("sweep", "sweep one axis and tabulate cost/error");
    add_common(sweep, run, variant);
    sweep->add_option("--axis", sweep_axis, "dw_bits | ratio | cores | tiles");
    sweep->add_option("--points", sweep_points, "explicit axis points");

    auto* compare = app.add_subcommand("compare", "mixed plan vs uniform-8-bit baseline");
    add_common(compare, run, variant);

    auto* validate = app.add_subcommand("validate", "check graph invariants");
    add_common(validate, run, variant);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        run.variant = m2q::variant_from_string(variant);

        if (quantize->parsed()) {
            const auto res = m2q::cmd_quantize(run);
            std::printf("plan: %s\n", res.plan_file.c_str());
            std::printf("layer errors: %s\n", res.errors_file.c_str());
            std::printf("achieved APoT:Uniform ratio: %.4f (%lld apot / %lld uniform)\n",
                        res.plan.achieved_apot_fraction,
                        static_cast<long long>(res.plan.apot_filters),
                        static_cast<long long>(res.plan.uniform_filters));
        } else if (simulate->parsed()) {
            const auto res = m2q::cmd_simulate(run);
            std::printf("%s", m2q::format_report_table(res.report, "simulation").c_str());
            for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
        } else if (sweep->parsed()) {
            const auto res = m2q::cmd_sweep(run, sweep_axis, sweep_points);
            std::printf("axis %s: %zu points -> %s\n", res.axis.c_str(),
                        res.points.size(), res.csv_file.c_str());
            for (const auto& pt : res.points)
                std::printf("  %-8.3g error=%.6g latency=%.4f ms energy=%.6e edp=%.6e\n",
                            pt.setting, pt.error_mse, pt.report.latency_s * 1e3,
                            pt.report.energy, pt.report.edp);
        } else if (compare->parsed()) {
            const auto res = m2q::cmd_compare(run);
            std::printf("%s", m2q::format_report_table(res.mixed, "mixed").c_str());
            std::printf("%s", m2q::format_report_table(res.uniform, "uniform8").c_str());
            std::printf("ratios (mixed/uniform8): compute energy %.4f | energy %.4f | "
                        "latency %.4f | EDP %.4f\n",
                        res.compute_energy_ratio, res.energy_ratio, res.latency_ratio,
                        res.edp_ratio);
            std::printf("wrote %s\n", res.file.c_str());
        } else if (validate->parsed()) {
            const auto violations = m2q::cmd_validate(run);
            if (violations.empty()) {
                std::printf("ok\n");
            } else {
                for (const auto& v : violations)
                    std::fprintf(stderr, "layer %d [%s]: %s\n", v.layer_id,
                                 v.code.c_str(), v.message.c_str());
                return kExitValidation;
            }
        }
    } catch (const m2q::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const m2q::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitOk;
}
