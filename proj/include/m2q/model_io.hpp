// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "m2q/netgraph.hpp"
#include "m2q/weights.hpp"

namespace m2q {

struct LoadedModel {
    NetworkGraph graph;
    // present when the manifest references a weight blob
    std::optional<WeightStore> weights;
};

// Reads a network manifest (JSON). When the manifest names a sidecar blob
// of little-endian float32 weights, per-layer (offset, length) references
// are resolved against it; length is in bytes and must equal the layer's
// expected weight count * 4. Parse failures throw ParseError with field
// context.
LoadedModel load_model(const std::string& manifest_path);

// Writes the manifest; when `weights` is given, a sidecar blob is written
// next to it and referenced per layer.
void save_model(const NetworkGraph& graph, const std::string& manifest_path,
                const WeightStore* weights = nullptr);

}  // namespace m2q
