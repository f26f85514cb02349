// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "m2q/netgraph.hpp"

namespace m2q {

// Per-layer float weights.
//
// Layouts (row-major, matching the execution loops in exec.cpp):
//   DWConv  [channel][kh][kw]
//   PWConv  [filter][c_in]
//   MatMul  [filter][cols/groups]   filter f belongs to group
//                                   f / (filters/groups)
// Elementwise layers store nothing. Attention MatMuls hold a static
// stand-in block for the data-dependent operand; the normalizer
// (quantize_weights == false) holds all-ones so it computes the per-head
// row sum it models.
class WeightStore {
public:
    bool has(int layer_id) const { return weights_.count(layer_id) != 0; }

    std::span<const double> layer(int layer_id) const;
    std::span<const double> filter(const LayerSpec& l, int64_t filter_index) const;

    void set(int layer_id, std::vector<double> w) { weights_[layer_id] = std::move(w); }

private:
    std::unordered_map<int, std::vector<double>> weights_;
};

// Deterministic pseudo-random weights for every weighted layer. Filters of
// computation-intensive layers alternate between uniform and Gaussian
// draws so both weight-distribution families are represented; DWConv
// channels are Gaussian. Streams are derived per (layer, filter), so the
// result is independent of generation order.
WeightStore synthesize_weights(const NetworkGraph& graph, uint64_t seed);

// Deterministic input tensor shaped like the network input.
std::vector<double> synthesize_input(const NetworkGraph& graph, uint64_t seed);

}  // namespace m2q
