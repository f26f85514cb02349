// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "m2q/common.hpp"

namespace m2q {

enum class LayerKind { DWConv, PWConv, MatMul, Elementwise };

enum class Activation { None, ReLU };

// Zero-cost glue ops carried for shape integrity only. They run in the
// float domain between quantized layers and cost no engine cycles.
enum class EltOp { Identity, Add, Div, GlobalAvgPool };

enum class LayerCategory { ComputationIntensive, MemoryIntensive };

const char* to_string(LayerKind k);
const char* to_string(Activation a);
const char* to_string(EltOp op);
const char* to_string(LayerCategory c);

// Tensor shape: rank 3 = (channels, height, width) for conv layers,
// rank 2 = (rows, cols) for MatMul operands.
struct Shape {
    int64_t d0 = 0;
    int64_t d1 = 0;
    int64_t d2 = 0;
    int rank = 0;

    static Shape chw(int64_t c, int64_t h, int64_t w) { return {c, h, w, 3}; }
    static Shape rc(int64_t rows, int64_t cols) { return {rows, cols, 0, 2}; }

    int64_t channels() const { return d0; }
    int64_t height() const { return d1; }
    int64_t width() const { return d2; }
    int64_t rows() const { return d0; }
    int64_t cols() const { return d1; }

    int64_t elements() const {
        if (rank == 3) return d0 * d1 * d2;
        if (rank == 2) return d0 * d1;
        return 0;
    }

    bool operator==(const Shape& o) const {
        return rank == o.rank && d0 == o.d0 && d1 == o.d1 && d2 == o.d2;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const;
};

// One layer of the network IR.
//
// Data semantics by kind:
//   DWConv   input (C,H,W), one (kh,kw) weight channel per filter,
//            filters == C, 'same' padding, output (C, ceil(H/s), ceil(W/s)).
//   PWConv   input (C,H,W), kernel (1,1), dense C -> filters map per pixel.
//   MatMul   input (rows, cols), weight (cols/groups, filters/groups) per
//            group, output (rows, filters). groups > 1 models head-parallel
//            products with block-diagonal weights.
//   Elementwise  Add/Div/Identity/GlobalAvgPool; carries shapes, no weights.
//
// producers: upstream layer ids. The first producer supplies the data
// input; extra producers on MatMul records operand dependences that the
// scheduler must respect (the stand-in weight tensor is static, see
// weights.hpp). Elementwise Add/Div consume every producer.
struct LayerSpec {
    int id = -1;
    LayerKind kind = LayerKind::Elementwise;
    Shape input;
    int kernel_h = 1;
    int kernel_w = 1;
    int64_t filters = 0;
    int stride = 1;
    int groups = 1;
    std::vector<int> producers;
    Activation activation = Activation::None;
    EltOp elt_op = EltOp::Identity;
    // false marks layers executed with fixed full-precision weights (the
    // attention normalizer row-sum); they are costed like uniform MatMuls
    // but excluded from quantization-scheme assignment.
    bool quantize_weights = true;
    std::string name;

    Shape output_shape() const;
    int64_t mac_count() const;
    // number of stored weights (0 for elementwise)
    int64_t weight_count() const;
    // weights per output filter
    int64_t filter_weight_count() const;
    bool has_weights() const { return kind != LayerKind::Elementwise; }
    // participates in quantization-scheme assignment
    bool is_quantizable() const {
        return kind != LayerKind::Elementwise && quantize_weights;
    }
};

struct NetworkGraph {
    std::string name;
    int input_h = 0;
    int input_w = 0;
    int input_channels = 3;
    std::vector<LayerSpec> layers;  // topological order: producers first

    int64_t total_macs() const;
    const LayerSpec* find(int id) const;
    Shape input_shape() const {
        return Shape::chw(input_channels, input_h, input_w);
    }
};

// Operation-intensity class of a layer. Elementwise layers carry no
// weights and are not quantized; asking for their category is an error.
LayerCategory layer_category(const LayerSpec& layer);

struct Violation {
    int layer_id = -1;
    std::string code;     // short machine tag, e.g. "order", "kernel"
    std::string message;  // human detail
};

// Returns every invariant violation found; empty result means the graph
// is well formed.
std::vector<Violation> validate_graph(const NetworkGraph& graph);

}  // namespace m2q
