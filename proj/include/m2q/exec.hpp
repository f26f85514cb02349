// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "m2q/netgraph.hpp"
#include "m2q/plan.hpp"
#include "m2q/quant.hpp"
#include "m2q/weights.hpp"

namespace m2q {

// Dense tensor; rank-3 data is channel-major (c, y, x), rank-2 row-major.
struct FloatTensor {
    Shape shape;
    std::vector<double> data;
};

struct IntTensor {
    Shape shape;
    QuantParams params;
    std::vector<uint8_t> codes;
};

FloatTensor dequantize(const IntTensor& t);
IntTensor quantize(const FloatTensor& t, const QuantParams& p);

// Fixed-point partial product. value * 2^fixed_point_shift is the exact
// real product; the int64 storage comfortably covers the static worst
// case asserted by accumulator_bounds (the model requires < 2^31).
struct WideAccumulator {
    int64_t value = 0;
    int fixed_point_shift = 0;
};

// a * s * (2^p1 + 2^p2) realized as two left shifts and an add, aligned at
// the smallest APoT exponent. Exact for every activation code.
WideAccumulator shift_multiply(int64_t a, const APoTCode& code);
// Single-term PoT variant with an explicit alignment exponent.
WideAccumulator shift_multiply(int64_t a, const PoTCode& code, int p_min);

// Per-layer weight codes materialized from plan + float weights.
struct EncodedFilter {
    Scheme scheme = Scheme::Uniform8;
    QuantParams uparams;
    std::vector<uint8_t> ucodes;
    double apot_scale = 0;
    std::vector<APoTCode> acodes;
};

struct EncodedLayer {
    bool quantized = false;                 // false: float weights (normalizer)
    std::vector<EncodedFilter> filters;     // per output filter
    std::vector<double> float_weights;      // when !quantized
    QuantParams out_params;                 // output activation params
};

EncodedLayer encode_layer(const LayerSpec& layer, const WeightStore& weights,
                          const LayerPlan& plan);

// Integer execution of one weighted layer (DWConv / PWConv / MatMul).
// Uniform filters run integer multiplies; APoT filters run shift_multiply.
// The accumulated integer sum is rescaled once with full-precision scales,
// passed through the activation, and requantized to enc.out_params.
IntTensor execute_layer(const LayerSpec& layer, const EncodedLayer& enc,
                        const IntTensor& input);

// Static accumulator-safety audit: worst-case |partial sum| per layer from
// shapes and bit widths. Throws ExecError if any layer could exceed the
// signed 32-bit budget the engines assume.
struct AccumulatorBound {
    int layer_id = -1;
    int64_t worst_abs = 0;
};
std::vector<AccumulatorBound> accumulator_bounds(const NetworkGraph& graph,
                                                 const QuantPlan& plan);

// Float reference path (double precision) over the original weights.
std::vector<FloatTensor> run_float_reference(const NetworkGraph& graph,
                                             const WeightStore& weights,
                                             std::span<const double> input);

// Pooled per-layer output ranges over a set of calibration inputs.
ActivationStats collect_activation_stats(const NetworkGraph& graph,
                                         const WeightStore& weights,
                                         std::span<const std::vector<double>> inputs);

struct LayerError {
    int layer_id = -1;
    double mse = 0;
    double max_abs = 0;
};

struct RunResult {
    FloatTensor output;             // dequantized final output
    std::vector<LayerError> errors; // quantized vs float reference, per layer
};

// End-to-end quantized inference plus the float reference on the same
// input; per-layer errors compare the dequantized quantized outputs
// against the reference.
RunResult run_network(const NetworkGraph& graph, const WeightStore& weights,
                      const QuantPlan& plan, std::span<const double> input);

// Same, reusing an already-computed float reference for this input
// (plan sweeps on a fixed probe).
RunResult run_network_with_reference(const NetworkGraph& graph, const WeightStore& weights,
                                     const QuantPlan& plan, std::span<const double> input,
                                     std::span<const FloatTensor> reference);

// Bit-width ablation for the memory-intensive layers: DWConv weights are
// replaced by their (dw_bits, per-filter) quantize-dequantize images while
// everything else stays in float, and the end-to-end output MSE against
// the unperturbed reference is returned. Isolates the swept width from
// the 8-bit noise of the other ~hundred tensors, whose interference
// otherwise floors the end-to-end error from about 5 bits up.
double dw_weight_ablation_mse(const NetworkGraph& graph, const WeightStore& weights,
                              int dw_bits, std::span<const double> input,
                              std::span<const FloatTensor> reference);

}  // namespace m2q
