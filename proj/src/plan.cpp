// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace m2q {

using ordered_json = nlohmann::ordered_json;

int64_t LayerPlan::apot_filter_count() const {
    int64_t n = 0;
    for (const auto& f : filters)
        if (f.scheme == Scheme::APoT) ++n;
    return n;
}

const LayerPlan& QuantPlan::at(int layer_id) const {
    auto it = layers.find(layer_id);
    if (it == layers.end())
        throw ExecError("plan has no entry for layer " + std::to_string(layer_id));
    return it->second;
}

namespace {

QuantParams activation_params(const ActivationStats& stats, int layer_id) {
    auto it = stats.per_layer.find(layer_id);
    if (it == stats.per_layer.end())
        throw ConfigError("activation stats missing layer " + std::to_string(layer_id));
    return calibrate_affine_minmax(it->second.first, it->second.second, 8,
                                   Granularity::PerLayer);
}

struct Candidate {
    int layer_id;
    int64_t filter;
    double gain;  // mse(uniform8) - mse(apot)
};

// stable ranking: ties and equal gains resolve by (layer, filter) index
void rank_desc(std::vector<Candidate>& c) {
    std::stable_sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
        return a.gain > b.gain;
    });
}

}  // namespace

QuantPlan assign_m2q(const NetworkGraph& graph, const WeightStore& weights,
                     const ActivationStats& stats, const PlanOptions& options) {
    const double r = options.target_ratio;
    if (!(r >= 0.0 && r <= 1.0))
        throw ConfigError("target_ratio must lie in [0,1], got " + std::to_string(r));
    if (options.dw_bits < 3 || options.dw_bits > 8)
        throw ConfigError("dw_bits must be in [3,8]");

    QuantPlan plan;
    plan.options = options;
    plan.input_activation =
        calibrate_affine_minmax(stats.input_min, stats.input_max, 8, Granularity::PerLayer);

    // First pass: per-layer scaffolding, DWConv quantization, candidate MSEs.
    std::map<int, std::vector<Candidate>> comp_candidates;  // per comp layer
    for (const auto& l : graph.layers) {
        LayerPlan lp;
        lp.layer_id = l.id;
        lp.activation = activation_params(stats, l.id);

        if (!l.is_quantizable()) {
            lp.quantized = false;
            plan.layers.emplace(l.id, std::move(lp));
            continue;
        }

        lp.quantized = true;
        lp.category = layer_category(l);
        lp.filters.resize(static_cast<size_t>(l.filters));

        if (*lp.category == LayerCategory::MemoryIntensive) {
            lp.weight_bits = options.dw_bits;
            for (int64_t f = 0; f < l.filters; ++f) {
                const auto w = weights.filter(l, f);
                auto& fp = lp.filters[static_cast<size_t>(f)];
                fp.scheme = Scheme::Uniform8;
                fp.uniform = calibrate_affine(w, options.dw_bits, Granularity::PerFilter);
            }
        } else {
            lp.weight_bits = 0;  // mixed per filter
            auto& cands = comp_candidates[l.id];
            cands.reserve(static_cast<size_t>(l.filters));
            for (int64_t f = 0; f < l.filters; ++f) {
                const auto w = weights.filter(l, f);
                const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
                if (*mx - *mn <= 0) {
                    // constant filter: uniform represents it exactly, never
                    // an APoT candidate
                    continue;
                }
                cands.push_back({l.id, f, uniform_weight_mse(w) - apot_weight_mse(w)});
            }
        }
        plan.layers.emplace(l.id, std::move(lp));
    }

    // Second pass: ratio enforcement over computation-intensive filters.
    std::vector<Candidate> chosen;
    if (options.scope == RatioScope::PerLayer) {
        for (auto& [layer_id, cands] : comp_candidates) {
            const int64_t total =
                static_cast<int64_t>(plan.at(layer_id).filters.size());
            int64_t k = std::llround(r * static_cast<double>(total));
            k = std::min<int64_t>(k, static_cast<int64_t>(cands.size()));
            rank_desc(cands);
            chosen.insert(chosen.end(), cands.begin(), cands.begin() + k);
        }
    } else {
        std::vector<Candidate> all;
        int64_t total = 0;
        for (auto& [layer_id, cands] : comp_candidates) {
            total += static_cast<int64_t>(plan.at(layer_id).filters.size());
            all.insert(all.end(), cands.begin(), cands.end());
        }
        int64_t k = std::llround(r * static_cast<double>(total));
        k = std::min<int64_t>(k, static_cast<int64_t>(all.size()));
        rank_desc(all);
        chosen.assign(all.begin(), all.begin() + k);
    }

    for (const auto& c : chosen) {
        auto& fp = plan.layers.at(c.layer_id).filters[static_cast<size_t>(c.filter)];
        fp.scheme = Scheme::APoT;
    }

    // Fill per-filter parameters for computation-intensive layers.
    for (const auto& l : graph.layers) {
        if (!l.is_quantizable()) continue;
        auto& lp = plan.layers.at(l.id);
        if (lp.category != LayerCategory::ComputationIntensive) continue;
        for (int64_t f = 0; f < l.filters; ++f) {
            const auto w = weights.filter(l, f);
            auto& fp = lp.filters[static_cast<size_t>(f)];
            if (fp.scheme == Scheme::APoT) {
                const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
                fp.apot_scale = *mx - *mn;
                plan.apot_filters++;
            } else {
                fp.uniform = calibrate_affine(w, 8, Granularity::PerFilter);
                plan.uniform_filters++;
            }
        }
    }

    const int64_t comp_total = plan.apot_filters + plan.uniform_filters;
    plan.achieved_apot_fraction =
        comp_total > 0 ? static_cast<double>(plan.apot_filters) /
                             static_cast<double>(comp_total)
                       : 0.0;
    return plan;
}

namespace {

ordered_json params_json(const QuantParams& p) {
    return {{"scale", p.scale},
            {"zero_point", p.zero_point},
            {"bits", p.bits},
            {"granularity", p.granularity == Granularity::PerFilter ? "filter" : "layer"}};
}

QuantParams params_from_json(const ordered_json& j) {
    QuantParams p;
    p.scale = j.at("scale").get<double>();
    p.zero_point = j.at("zero_point").get<int>();
    p.bits = j.at("bits").get<int>();
    p.granularity = j.at("granularity").get<std::string>() == "filter"
                        ? Granularity::PerFilter
                        : Granularity::PerLayer;
    return p;
}

}  // namespace

void save_plan(const QuantPlan& plan, const std::string& path) {
    ordered_json j;
    j["target_ratio"] = plan.options.target_ratio;
    j["ratio_scope"] = plan.options.scope == RatioScope::PerLayer ? "layer" : "network";
    j["dw_bits"] = plan.options.dw_bits;
    j["activation_bits"] = 8;
    j["achieved_apot_fraction"] = plan.achieved_apot_fraction;
    j["apot_filters"] = plan.apot_filters;
    j["uniform_filters"] = plan.uniform_filters;
    j["input_activation"] = params_json(plan.input_activation);
    j["layers"] = ordered_json::array();
    for (const auto& [id, lp] : plan.layers) {
        ordered_json lj;
        lj["layer_id"] = id;
        lj["quantized"] = lp.quantized;
        if (lp.category) lj["category"] = to_string(*lp.category);
        if (lp.weight_bits > 0) lj["weight_bits"] = lp.weight_bits;
        lj["activation"] = params_json(lp.activation);
        if (lp.quantized) {
            ordered_json fj = ordered_json::array();
            for (const auto& f : lp.filters) {
                if (f.scheme == Scheme::APoT)
                    fj.push_back({{"scheme", "apot"}, {"scale", f.apot_scale}});
                else
                    fj.push_back({{"scheme", "uniform8"},
                                  {"scale", f.uniform.scale},
                                  {"zero_point", f.uniform.zero_point},
                                  {"bits", f.uniform.bits}});
            }
            lj["filters"] = std::move(fj);
        }
        j["layers"].push_back(std::move(lj));
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write plan: " + path);
    out << j.dump(2) << "\n";
}

QuantPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open plan: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid JSON: " + std::string(e.what()));
    }

    QuantPlan plan;
    plan.options.target_ratio = j.at("target_ratio").get<double>();
    plan.options.scope = j.at("ratio_scope").get<std::string>() == "network"
                             ? RatioScope::NetworkWide
                             : RatioScope::PerLayer;
    plan.options.dw_bits = j.at("dw_bits").get<int>();
    plan.achieved_apot_fraction = j.at("achieved_apot_fraction").get<double>();
    plan.apot_filters = j.value("apot_filters", int64_t{0});
    plan.uniform_filters = j.value("uniform_filters", int64_t{0});
    plan.input_activation = params_from_json(j.at("input_activation"));

    for (const auto& lj : j.at("layers")) {
        LayerPlan lp;
        lp.layer_id = lj.at("layer_id").get<int>();
        lp.quantized = lj.at("quantized").get<bool>();
        if (lj.contains("category"))
            lp.category = lj.at("category").get<std::string>() == "memory_intensive"
                              ? LayerCategory::MemoryIntensive
                              : LayerCategory::ComputationIntensive;
        lp.weight_bits = lj.value("weight_bits", 0);
        lp.activation = params_from_json(lj.at("activation"));
        if (lj.contains("filters")) {
            for (const auto& fj : lj.at("filters")) {
                FilterPlan fp;
                if (fj.at("scheme").get<std::string>() == "apot") {
                    fp.scheme = Scheme::APoT;
                    fp.apot_scale = fj.at("scale").get<double>();
                } else {
                    fp.scheme = Scheme::Uniform8;
                    fp.uniform.scale = fj.at("scale").get<double>();
                    fp.uniform.zero_point = fj.at("zero_point").get<int>();
                    fp.uniform.bits = fj.at("bits").get<int>();
                    fp.uniform.granularity = Granularity::PerFilter;
                }
                lp.filters.push_back(fp);
            }
        }
        plan.layers.emplace(lp.layer_id, std::move(lp));
    }
    return plan;
}

}  // namespace m2q
