// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/weights.hpp"

#include <cmath>

namespace m2q {

std::span<const double> WeightStore::layer(int layer_id) const {
    auto it = weights_.find(layer_id);
    if (it == weights_.end())
        throw ExecError("no weights for layer " + std::to_string(layer_id));
    return it->second;
}

std::span<const double> WeightStore::filter(const LayerSpec& l, int64_t filter_index) const {
    const std::span<const double> all = layer(l.id);
    const int64_t per = l.filter_weight_count();
    return all.subspan(static_cast<size_t>(filter_index * per), static_cast<size_t>(per));
}

WeightStore synthesize_weights(const NetworkGraph& graph, uint64_t seed) {
    WeightStore store;
    for (const auto& l : graph.layers) {
        if (!l.has_weights()) continue;
        const int64_t per = l.filter_weight_count();
        std::vector<double> w(static_cast<size_t>(l.weight_count()));

        if (!l.quantize_weights) {
            // normalizer row-sum blocks
            for (auto& v : w) v = 1.0;
            store.set(l.id, std::move(w));
            continue;
        }

        const double fan_in = static_cast<double>(per);
        const double sigma = std::sqrt(2.0 / fan_in);
        const double bound = std::sqrt(6.0 / fan_in);

        for (int64_t f = 0; f < l.filters; ++f) {
            SplitMix64 rng(derive_seed(seed, static_cast<uint64_t>(l.id),
                                       static_cast<uint64_t>(f)));
            const bool gaussian = (l.kind == LayerKind::DWConv) || (f % 2 == 1);
            for (int64_t i = 0; i < per; ++i) {
                double v = gaussian ? sigma * rng.next_gaussian()
                                    : rng.next_uniform(-bound, bound);
                w[static_cast<size_t>(f * per + i)] = v;
            }
        }
        store.set(l.id, std::move(w));
    }
    return store;
}

std::vector<double> synthesize_input(const NetworkGraph& graph, uint64_t seed) {
    const int64_t n = graph.input_shape().elements();
    std::vector<double> x(static_cast<size_t>(n));
    SplitMix64 rng(derive_seed(seed, 0xa11ce));
    for (auto& v : x) v = rng.next_gaussian();
    return x;
}

}  // namespace m2q
