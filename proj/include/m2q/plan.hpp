// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m2q/netgraph.hpp"
#include "m2q/quant.hpp"
#include "m2q/weights.hpp"

namespace m2q {

// Whether the APoT:uniform ratio is enforced inside every layer (keeps
// both engines busy on each layer) or only across the whole network.
enum class RatioScope { PerLayer, NetworkWide };

struct FilterPlan {
    Scheme scheme = Scheme::Uniform8;
    QuantParams uniform;     // valid for uniform filters (any bit width)
    double apot_scale = 0;   // valid for APoT filters
};

struct LayerPlan {
    int layer_id = -1;
    bool quantized = false;  // false: elementwise / fixed-weight layers
    std::optional<LayerCategory> category;
    // uniform weight width of the layer; 0 for mixed-scheme layers where
    // per-filter entries decide (8-bit uniform / 5-bit APoT)
    int weight_bits = 0;
    QuantParams activation;  // output activation params, 8-bit per-layer
    std::vector<FilterPlan> filters;

    int64_t apot_filter_count() const;
};

struct PlanOptions {
    double target_ratio = 0.5;  // APoT fraction of computation-intensive filters
    int dw_bits = 4;
    RatioScope scope = RatioScope::PerLayer;
};

struct QuantPlan {
    PlanOptions options;
    QuantParams input_activation;
    std::map<int, LayerPlan> layers;
    int64_t apot_filters = 0;
    int64_t uniform_filters = 0;  // computation-intensive uniform filters
    double achieved_apot_fraction = 0;

    const LayerPlan& at(int layer_id) const;
};

// Pooled per-layer output ranges gathered from float calibration runs
// (exec::collect_activation_stats). Quantization consumes only the ranges,
// never the activations themselves.
struct ActivationStats {
    double input_min = 0;
    double input_max = 0;
    std::map<int, std::pair<double, double>> per_layer;
};

// The two-level assignment policy: DWConv filters get low-bit uniform
// codes (dw_bits, per filter); every computation-intensive layer ranks its
// filters by uniform-vs-APoT MSE gain and sends the top target_ratio
// fraction to APoT, per layer by default. Activations are annotated 8-bit
// uniform per layer throughout. target_ratio must lie in [0, 1]; 0 and 1
// select the pure-scheme baselines.
QuantPlan assign_m2q(const NetworkGraph& graph, const WeightStore& weights,
                     const ActivationStats& stats, const PlanOptions& options);

void save_plan(const QuantPlan& plan, const std::string& path);
QuantPlan load_plan(const std::string& path);

}  // namespace m2q
