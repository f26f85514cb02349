// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/builders.hpp"

#include <array>

namespace m2q {

GraphBuilder::GraphBuilder(std::string name, int channels, int height, int width) {
    graph_.name = std::move(name);
    graph_.input_channels = channels;
    graph_.input_h = height;
    graph_.input_w = width;
}

Shape GraphBuilder::shape_of(int producer) const {
    if (producer < 0) return graph_.input_shape();
    const LayerSpec* l = graph_.find(producer);
    if (!l) throw ConfigError("builder: unknown producer id " + std::to_string(producer));
    return l->output_shape();
}

int GraphBuilder::push(LayerSpec l) {
    l.id = next_id_++;
    graph_.layers.push_back(std::move(l));
    return graph_.layers.back().id;
}

int GraphBuilder::pwconv(int producer, int64_t filters, Activation act,
                         const std::string& name) {
    const Shape in = shape_of(producer);
    if (in.rank != 3) throw ConfigError("pwconv needs a (c,h,w) producer: " + name);
    LayerSpec l;
    l.kind = LayerKind::PWConv;
    l.input = in;
    l.filters = filters;
    if (producer >= 0) l.producers = {producer};
    l.activation = act;
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::pwconv_tokens(int producer, int64_t filters, int64_t h, int64_t w,
                                Activation act, const std::string& name) {
    const Shape in = shape_of(producer);
    if (in.rank != 2 || in.rows() != h * w)
        throw ConfigError("pwconv_tokens: producer is not (h*w, c): " + name);
    LayerSpec l;
    l.kind = LayerKind::PWConv;
    l.input = Shape::chw(in.cols(), h, w);
    l.filters = filters;
    if (producer >= 0) l.producers = {producer};
    l.activation = act;
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::dwconv(int producer, int kernel, int stride, Activation act,
                         const std::string& name) {
    const Shape in = shape_of(producer);
    if (in.rank != 3) throw ConfigError("dwconv needs a (c,h,w) producer: " + name);
    LayerSpec l;
    l.kind = LayerKind::DWConv;
    l.input = in;
    l.kernel_h = l.kernel_w = kernel;
    l.stride = stride;
    l.filters = in.channels();
    if (producer >= 0) l.producers = {producer};
    l.activation = act;
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::matmul(const std::vector<int>& producers, int64_t filters, int groups,
                         bool quantize, Activation act, const std::string& name) {
    if (producers.empty()) throw ConfigError("matmul needs a producer: " + name);
    const Shape in = shape_of(producers[0]);
    LayerSpec l;
    l.kind = LayerKind::MatMul;
    // conv producers are reinterpreted token-major: (C,H,W) -> (H*W, C)
    l.input = in.rank == 3 ? Shape::rc(in.height() * in.width(), in.channels()) : in;
    l.filters = filters;
    l.groups = groups;
    l.producers = producers;
    l.quantize_weights = quantize;
    l.activation = act;
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::add(const std::vector<int>& producers, const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::Elementwise;
    l.elt_op = EltOp::Add;
    l.input = shape_of(producers.at(0));
    l.producers = producers;
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::div(int numerator, int denominator, const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::Elementwise;
    l.elt_op = EltOp::Div;
    l.input = shape_of(numerator);
    l.producers = {numerator, denominator};
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::global_avg_pool(int producer, const std::string& name) {
    LayerSpec l;
    l.kind = LayerKind::Elementwise;
    l.elt_op = EltOp::GlobalAvgPool;
    l.input = shape_of(producer);
    l.producers = {producer};
    l.name = name;
    return push(std::move(l));
}

int GraphBuilder::mbconv(int producer, int64_t out_channels, int stride, int expand,
                         const std::string& name) {
    const Shape in = shape_of(producer);
    const int64_t c_in = in.channels();
    const int64_t mid = c_in * expand;
    int x = producer;
    if (expand != 1) x = pwconv(x, mid, Activation::ReLU, name + ".expand");
    x = dwconv(x, 3, stride, Activation::ReLU, name + ".dw");
    x = pwconv(x, out_channels, Activation::None, name + ".project");
    if (stride == 1 && out_channels == c_in && producer >= 0) {
        x = add({x, producer}, name + ".residual");
    }
    return x;
}

int GraphBuilder::attention_block(int producer, int head_dim, const std::string& name) {
    const Shape in = shape_of(producer);
    const int64_t c = in.channels();
    if (c % head_dim != 0)
        throw ConfigError("attention: channels " + std::to_string(c) +
                          " not divisible by head dim " + std::to_string(head_dim));
    const int heads = static_cast<int>(c / head_dim);

    const int q = pwconv(producer, c, Activation::ReLU, name + ".q");
    const int k = pwconv(producer, c, Activation::ReLU, name + ".k");
    const int v = pwconv(producer, c, Activation::None, name + ".v");
    // relu(K)^T V per head; V enters as an operand dependence, the weight
    // block stands in for it (see weights.hpp)
    const int ktv = matmul({k, v}, c, heads, /*quantize=*/true, Activation::None,
                           name + ".ktv");
    const int qa = matmul({q, ktv}, c, heads, /*quantize=*/true, Activation::None,
                          name + ".qattn");
    // per-head row sum of relu(Q): fixed all-ones weights, never quantized
    const int norm = matmul({q}, heads, heads, /*quantize=*/false, Activation::None,
                            name + ".norm");
    const int d = div(qa, norm, name + ".div");
    const int proj = pwconv_tokens(d, c, in.height(), in.width(), Activation::None,
                                   name + ".proj");
    return add({proj, producer}, name + ".residual");
}

namespace {

struct VariantCfg {
    const char* tag;
    std::array<int64_t, 5> widths;  // stem, stage1..stage4
    std::array<int, 5> depths;      // stem DSConvs, stage block counts
    int expand;
    int attn_dim;
    int64_t head_width;
    int64_t classes;
};

// Approximate stage tables; MAC totals land on the published compute
// budgets of the corresponding variants (B1-224 ~= 0.52G MACs).
constexpr VariantCfg kB1{"b1", {16, 32, 64, 128, 256}, {1, 2, 3, 4, 4}, 4, 16, 2048, 1000};
constexpr VariantCfg kB2{"b2", {24, 48, 96, 192, 384}, {1, 3, 4, 5, 6}, 4, 16, 3072, 1000};

NetworkGraph build_from_cfg(const VariantCfg& cfg, int resolution) {
    GraphBuilder b(std::string("efficientvit-") + cfg.tag + "-r" +
                       std::to_string(resolution),
                   3, resolution, resolution);

    // Stem: depthwise-separable approximation of the 3x3 stride-2 input
    // conv (the layer taxonomy has no dense conv), then DSConv blocks.
    int x = b.dwconv(-1, 3, 2, Activation::ReLU, "stem.dw");
    x = b.pwconv(x, cfg.widths[0], Activation::ReLU, "stem.pw");
    for (int i = 0; i < cfg.depths[0]; ++i) {
        const std::string nm = "stem.block" + std::to_string(i);
        const int pre = x;
        int y = b.dwconv(x, 3, 1, Activation::ReLU, nm + ".dw");
        y = b.pwconv(y, cfg.widths[0], Activation::None, nm + ".pw");
        x = b.add({y, pre}, nm + ".residual");
    }

    // Stages 1-2: MBConv only, first block downsamples.
    for (int s = 1; s <= 2; ++s) {
        for (int i = 0; i < cfg.depths[s]; ++i) {
            const std::string nm =
                "s" + std::to_string(s) + ".block" + std::to_string(i);
            x = b.mbconv(x, cfg.widths[s], i == 0 ? 2 : 1, cfg.expand, nm);
        }
    }

    // Stages 3-4: MBConv downsample, then attention + MBConv pairs.
    for (int s = 3; s <= 4; ++s) {
        const std::string sn = "s" + std::to_string(s);
        x = b.mbconv(x, cfg.widths[s], 2, cfg.expand, sn + ".down");
        for (int i = 0; i < cfg.depths[s]; ++i) {
            const std::string nm = sn + ".block" + std::to_string(i);
            x = b.attention_block(x, cfg.attn_dim, nm + ".attn");
            x = b.mbconv(x, cfg.widths[s], 1, cfg.expand, nm + ".mb");
        }
    }

    // Head: final expansion, pooled classifier.
    x = b.pwconv(x, cfg.head_width, Activation::ReLU, "head.expand");
    x = b.global_avg_pool(x, "head.pool");
    b.matmul({x}, cfg.classes, 1, /*quantize=*/true, Activation::None, "head.fc");

    return b.take();
}

}  // namespace

NetworkGraph build_efficientvit(Variant variant, int resolution) {
    const bool b1 = variant == Variant::B1;
    const bool known = (b1 && (resolution == 224 || resolution == 256 || resolution == 288)) ||
                       (!b1 && resolution == 224);
    if (!known)
        throw ConfigError(std::string("unknown variant/resolution pair: ") +
                          to_string(variant) + "/" + std::to_string(resolution));
    return build_from_cfg(b1 ? kB1 : kB2, resolution);
}

Variant variant_from_string(const std::string& s) {
    if (s == "B1" || s == "b1") return Variant::B1;
    if (s == "B2" || s == "b2") return Variant::B2;
    throw ConfigError("unknown variant: " + s);
}

const char* to_string(Variant v) { return v == Variant::B1 ? "B1" : "B2"; }

}  // namespace m2q
