// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "m2q/netgraph.hpp"

namespace m2q {

enum class Variant { B1, B2 };

// Incremental graph construction with automatic id assignment and shape
// propagation. The producer argument is a layer id; -1 feeds the network
// input.
class GraphBuilder {
public:
    GraphBuilder(std::string name, int channels, int height, int width);

    int pwconv(int producer, int64_t filters, Activation act, const std::string& name);
    // pwconv over a token-major (rows, cols) producer, reinterpreted as
    // (cols, h, w) with rows == h*w
    int pwconv_tokens(int producer, int64_t filters, int64_t h, int64_t w,
                      Activation act, const std::string& name);
    int dwconv(int producer, int kernel, int stride, Activation act,
               const std::string& name);
    // grouped token-major product: input (rows, cols), block-diagonal weight,
    // one (cols/groups, filters/groups) block per group
    int matmul(const std::vector<int>& producers, int64_t filters, int groups,
               bool quantize, Activation act, const std::string& name);
    int add(const std::vector<int>& producers, const std::string& name);
    int div(int numerator, int denominator, const std::string& name);
    int global_avg_pool(int producer, const std::string& name);

    // MBConv: expand PWConv -> 3x3 DWConv -> project PWConv (+ residual
    // when stride 1 and channel-preserving). expand == 1 emits the
    // depthwise-separable form without the expansion PWConv.
    int mbconv(int producer, int64_t out_channels, int stride, int expand,
               const std::string& name);

    // ReLU linear attention: Q/K/V/out projections as PWConvs plus the
    // head-parallel MatMul chain relu(Q) x (relu(K)^T V) with a row-sum
    // normalizer MatMul and a float-domain divide. Residual add included.
    int attention_block(int producer, int head_dim, const std::string& name);

    Shape shape_of(int producer) const;
    NetworkGraph take() { return std::move(graph_); }

private:
    int push(LayerSpec l);
    NetworkGraph graph_;
    int next_id_ = 0;
};

// Builds the hybrid Convolution-Transformer variants used throughout the
// project. Stage width/depth tables are approximate reconstructions of
// EfficientViT-B1/B2 calibrated to their published compute budgets; they
// are not the released checkpoints. Valid pairs: B1 x {224,256,288},
// B2 x {224}. Anything else throws ConfigError.
NetworkGraph build_efficientvit(Variant variant, int resolution);

Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);

}  // namespace m2q
