// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/exec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace m2q {

namespace {

constexpr double kDivEpsilon = 1e-6;  // normalizer guard, float domain only

struct Pad {
    int64_t top = 0;
    int64_t left = 0;
};

// TF-style 'same' padding
Pad same_pad(const LayerSpec& l) {
    const int64_t ho = ceil_div(l.input.height(), l.stride);
    const int64_t wo = ceil_div(l.input.width(), l.stride);
    const int64_t ph =
        std::max<int64_t>((ho - 1) * l.stride + l.kernel_h - l.input.height(), 0);
    const int64_t pw =
        std::max<int64_t>((wo - 1) * l.stride + l.kernel_w - l.input.width(), 0);
    return {ph / 2, pw / 2};
}

template <typename T>
std::vector<T> chw_to_tokens(std::span<const T> in, int64_t c, int64_t hw) {
    std::vector<T> out(in.size());
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t p = 0; p < hw; ++p) out[p * c + ch] = in[ch * hw + p];
    return out;
}

template <typename T>
std::vector<T> tokens_to_chw(std::span<const T> in, int64_t c, int64_t hw) {
    std::vector<T> out(in.size());
    for (int64_t p = 0; p < hw; ++p)
        for (int64_t ch = 0; ch < c; ++ch) out[ch * hw + p] = in[p * c + ch];
    return out;
}

}  // namespace

FloatTensor dequantize(const IntTensor& t) {
    FloatTensor out;
    out.shape = t.shape;
    out.data.resize(t.codes.size());
    for (size_t i = 0; i < t.codes.size(); ++i)
        out.data[i] = dequantize_uniform(t.codes[i], t.params);
    return out;
}

IntTensor quantize(const FloatTensor& t, const QuantParams& p) {
    IntTensor out;
    out.shape = t.shape;
    out.params = p;
    out.codes.resize(t.data.size());
    for (size_t i = 0; i < t.data.size(); ++i)
        out.codes[i] = quantize_uniform_scalar(t.data[i], p);
    return out;
}

WideAccumulator shift_multiply(int64_t a, const APoTCode& code) {
    WideAccumulator acc{0, kApotPMin};
    if (code.zero) return acc;
    const int64_t t = (a << (code.p1 - kApotPMin)) + (a << (code.p2 - kApotPMin));
    acc.value = code.sign < 0 ? -t : t;
    return acc;
}

WideAccumulator shift_multiply(int64_t a, const PoTCode& code, int p_min) {
    WideAccumulator acc{0, p_min};
    if (code.p < p_min) throw ExecError("shift_multiply: exponent below alignment");
    const int64_t t = a << (code.p - p_min);
    acc.value = code.sign < 0 ? -t : t;
    return acc;
}

namespace {

// fixed-point weight term for APoT codes, aligned at kApotPMin
int32_t apot_term(const APoTCode& c) {
    if (c.zero) return 0;
    const int32_t t = (1 << (c.p1 - kApotPMin)) + (1 << (c.p2 - kApotPMin));
    return c.sign < 0 ? -t : t;
}

}  // namespace

EncodedLayer encode_layer(const LayerSpec& layer, const WeightStore& weights,
                          const LayerPlan& plan) {
    EncodedLayer enc;
    enc.out_params = plan.activation;
    if (!layer.has_weights()) return enc;

    const auto w = weights.layer(layer.id);
    if (!plan.quantized) {
        enc.quantized = false;
        enc.float_weights.assign(w.begin(), w.end());
        return enc;
    }

    enc.quantized = true;
    if (static_cast<int64_t>(plan.filters.size()) != layer.filters)
        throw ExecError("plan filter count mismatch on layer " + std::to_string(layer.id));

    const int64_t per = layer.filter_weight_count();
    enc.filters.resize(plan.filters.size());
    for (int64_t f = 0; f < layer.filters; ++f) {
        const auto fw = w.subspan(static_cast<size_t>(f * per), static_cast<size_t>(per));
        const FilterPlan& fp = plan.filters[static_cast<size_t>(f)];
        EncodedFilter& ef = enc.filters[static_cast<size_t>(f)];
        ef.scheme = fp.scheme;
        if (fp.scheme == Scheme::APoT) {
            ef.apot_scale = fp.apot_scale;
            ef.acodes.reserve(fw.size());
            for (double v : fw) ef.acodes.push_back(apot_encode(v, fp.apot_scale));
        } else {
            ef.uparams = fp.uniform;
            ef.ucodes = quantize_uniform(fw, fp.uniform);
        }
    }
    return enc;
}

namespace {

struct FilterKernel {
    // one fixed-point term per weight; uniform: (w_code - Zw), apot: the
    // shift-aligned term
    std::vector<int32_t> terms;
    double rescale = 0;  // accumulated-int -> real factor (excl. input scale)
};

FilterKernel make_kernel(const EncodedFilter& ef) {
    FilterKernel k;
    if (ef.scheme == Scheme::APoT) {
        k.terms.reserve(ef.acodes.size());
        for (const auto& c : ef.acodes) k.terms.push_back(apot_term(c));
        k.rescale = ef.apot_scale * std::ldexp(1.0, kApotPMin);
    } else {
        k.terms.reserve(ef.ucodes.size());
        for (uint8_t c : ef.ucodes)
            k.terms.push_back(static_cast<int32_t>(c) - ef.uparams.zero_point);
        k.rescale = ef.uparams.scale;
    }
    return k;
}

double apply_activation(double x, Activation act) {
    return act == Activation::ReLU ? std::max(x, 0.0) : x;
}

}  // namespace

IntTensor execute_layer(const LayerSpec& layer, const EncodedLayer& enc,
                        const IntTensor& input) {
    if (!enc.quantized)
        throw ExecError("layer " + std::to_string(layer.id) +
                        " executes in the float domain, not via execute_layer");
    if (input.shape != layer.input)
        throw ExecError("layer " + std::to_string(layer.id) + ": input shape " +
                        input.shape.str() + " != declared " + layer.input.str());
    if (static_cast<int64_t>(enc.filters.size()) != layer.filters)
        throw ExecError("layer " + std::to_string(layer.id) + ": missing plan entry");

    const QuantParams& pin = input.params;
    const QuantParams& pout = enc.out_params;
    const double s_in = pin.scale;
    const int z_in = pin.zero_point;

    IntTensor out;
    out.params = pout;
    out.shape = layer.output_shape();
    out.codes.resize(static_cast<size_t>(out.shape.elements()));

    std::vector<FilterKernel> kernels(enc.filters.size());
    for (size_t f = 0; f < enc.filters.size(); ++f) kernels[f] = make_kernel(enc.filters[f]);

    switch (layer.kind) {
        case LayerKind::DWConv: {
            const int64_t c_n = layer.input.channels();
            const int64_t h = layer.input.height(), w = layer.input.width();
            const int64_t ho = out.shape.height(), wo = out.shape.width();
            const Pad pad = same_pad(layer);
            for (int64_t c = 0; c < c_n; ++c) {
                const FilterKernel& k = kernels[static_cast<size_t>(c)];
                const uint8_t* in_c = input.codes.data() + c * h * w;
                for (int64_t yo = 0; yo < ho; ++yo) {
                    for (int64_t xo = 0; xo < wo; ++xo) {
                        int64_t acc = 0;
                        for (int64_t ky = 0; ky < layer.kernel_h; ++ky) {
                            const int64_t iy = yo * layer.stride - pad.top + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t kx = 0; kx < layer.kernel_w; ++kx) {
                                const int64_t ix = xo * layer.stride - pad.left + kx;
                                if (ix < 0 || ix >= w) continue;
                                const int a = static_cast<int>(in_c[iy * w + ix]) - z_in;
                                acc += static_cast<int64_t>(a) *
                                       k.terms[static_cast<size_t>(ky * layer.kernel_w + kx)];
                            }
                        }
                        const double real = apply_activation(
                            s_in * k.rescale * static_cast<double>(acc), layer.activation);
                        out.codes[static_cast<size_t>((c * ho + yo) * wo + xo)] =
                            quantize_uniform_scalar(real, pout);
                    }
                }
            }
            break;
        }
        case LayerKind::PWConv: {
            const int64_t c_n = layer.input.channels();
            const int64_t h = layer.input.height(), w = layer.input.width();
            const int64_t ho = out.shape.height(), wo = out.shape.width();
            const int64_t hw_out = ho * wo;
            // token-major activations make the channel loop contiguous
            const auto tok = chw_to_tokens(std::span<const uint8_t>(input.codes), c_n, h * w);
            for (int64_t yo = 0; yo < ho; ++yo) {
                for (int64_t xo = 0; xo < wo; ++xo) {
                    const int64_t pix_in = (yo * layer.stride) * w + xo * layer.stride;
                    const uint8_t* a_row = tok.data() + pix_in * c_n;
                    const int64_t pix_out = yo * wo + xo;
                    for (int64_t f = 0; f < layer.filters; ++f) {
                        const FilterKernel& k = kernels[static_cast<size_t>(f)];
                        int64_t acc = 0;
                        for (int64_t c = 0; c < c_n; ++c)
                            acc += static_cast<int64_t>(static_cast<int>(a_row[c]) - z_in) *
                                   k.terms[static_cast<size_t>(c)];
                        const double real = apply_activation(
                            s_in * k.rescale * static_cast<double>(acc), layer.activation);
                        out.codes[static_cast<size_t>(f * hw_out + pix_out)] =
                            quantize_uniform_scalar(real, pout);
                    }
                }
            }
            break;
        }
        case LayerKind::MatMul: {
            const int64_t rows = layer.input.rows(), cols = layer.input.cols();
            const int64_t fpg = layer.filters / layer.groups;
            const int64_t cg = cols / layer.groups;
            for (int64_t row = 0; row < rows; ++row) {
                const uint8_t* a_row = input.codes.data() + row * cols;
                for (int64_t f = 0; f < layer.filters; ++f) {
                    const int64_t g = f / fpg;
                    const FilterKernel& k = kernels[static_cast<size_t>(f)];
                    const uint8_t* a = a_row + g * cg;
                    int64_t acc = 0;
                    for (int64_t j = 0; j < cg; ++j)
                        acc += static_cast<int64_t>(static_cast<int>(a[j]) - z_in) *
                               k.terms[static_cast<size_t>(j)];
                    const double real = apply_activation(
                        s_in * k.rescale * static_cast<double>(acc), layer.activation);
                    out.codes[static_cast<size_t>(row * layer.filters + f)] =
                        quantize_uniform_scalar(real, pout);
                }
            }
            break;
        }
        case LayerKind::Elementwise:
            throw ExecError("elementwise layers are handled by run_network");
    }
    return out;
}

std::vector<AccumulatorBound> accumulator_bounds(const NetworkGraph& graph,
                                                 const QuantPlan& plan) {
    constexpr int64_t kBudget = int64_t{1} << 31;
    constexpr int64_t kMaxAct = 255;  // |a - Za| over the 8-bit code range
    std::vector<AccumulatorBound> out;
    for (const auto& l : graph.layers) {
        if (!l.has_weights()) continue;
        const LayerPlan& lp = plan.at(l.id);
        if (!lp.quantized) continue;
        const int64_t n = l.filter_weight_count();
        int64_t worst_term = 0;
        for (const auto& f : lp.filters) {
            if (f.scheme == Scheme::APoT) {
                const int64_t t = (1 << (kApotP1Max - kApotPMin)) +
                                  (1 << (kApotP2Max - kApotPMin));
                worst_term = std::max(worst_term, t);
            } else {
                worst_term = std::max<int64_t>(worst_term, f.uniform.max_code());
            }
        }
        const int64_t bound = n * kMaxAct * worst_term;
        out.push_back({l.id, bound});
        if (bound >= kBudget)
            throw ExecError("layer " + std::to_string(l.id) +
                            ": worst-case partial sum " + std::to_string(bound) +
                            " exceeds the 32-bit accumulator budget");
    }
    return out;
}

// --- float reference ------------------------------------------------------

namespace {

FloatTensor adapt_float(const FloatTensor& t, const LayerSpec& consumer) {
    const Shape want = consumer.input;
    FloatTensor out;
    if (consumer.kind == LayerKind::MatMul || want.rank == 2) {
        if (t.shape.rank == 2) return t;
        out.shape = Shape::rc(want.rows(), want.cols());
        out.data = chw_to_tokens(std::span<const double>(t.data), t.shape.channels(),
                                 t.shape.height() * t.shape.width());
        return out;
    }
    if (t.shape.rank == 3) return t;
    out.shape = want;
    out.data = tokens_to_chw(std::span<const double>(t.data), want.channels(),
                             want.height() * want.width());
    return out;
}

IntTensor adapt_int(const IntTensor& t, const LayerSpec& consumer) {
    const Shape want = consumer.input;
    IntTensor out;
    out.params = t.params;
    if (consumer.kind == LayerKind::MatMul || want.rank == 2) {
        if (t.shape.rank == 2) return t;
        out.shape = Shape::rc(want.rows(), want.cols());
        out.codes = chw_to_tokens(std::span<const uint8_t>(t.codes), t.shape.channels(),
                                  t.shape.height() * t.shape.width());
        return out;
    }
    if (t.shape.rank == 3) return t;
    out.shape = want;
    out.codes = tokens_to_chw(std::span<const uint8_t>(t.codes), want.channels(),
                              want.height() * want.width());
    return out;
}

FloatTensor float_weighted_layer(const LayerSpec& l, std::span<const double> w,
                                 const FloatTensor& input) {
    FloatTensor out;
    out.shape = l.output_shape();
    out.data.assign(static_cast<size_t>(out.shape.elements()), 0.0);

    switch (l.kind) {
        case LayerKind::DWConv: {
            const int64_t h = l.input.height(), wd = l.input.width();
            const int64_t ho = out.shape.height(), wo = out.shape.width();
            const Pad pad = same_pad(l);
            for (int64_t c = 0; c < l.input.channels(); ++c) {
                const double* in_c = input.data.data() + c * h * wd;
                const double* wk = w.data() + c * l.kernel_h * l.kernel_w;
                for (int64_t yo = 0; yo < ho; ++yo)
                    for (int64_t xo = 0; xo < wo; ++xo) {
                        double acc = 0;
                        for (int64_t ky = 0; ky < l.kernel_h; ++ky) {
                            const int64_t iy = yo * l.stride - pad.top + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t kx = 0; kx < l.kernel_w; ++kx) {
                                const int64_t ix = xo * l.stride - pad.left + kx;
                                if (ix < 0 || ix >= wd) continue;
                                acc += in_c[iy * wd + ix] * wk[ky * l.kernel_w + kx];
                            }
                        }
                        out.data[static_cast<size_t>((c * ho + yo) * wo + xo)] =
                            apply_activation(acc, l.activation);
                    }
            }
            break;
        }
        case LayerKind::PWConv: {
            const int64_t c_n = l.input.channels();
            const int64_t h = l.input.height(), wd = l.input.width();
            const int64_t ho = out.shape.height(), wo = out.shape.width();
            const auto tok = chw_to_tokens(std::span<const double>(input.data), c_n, h * wd);
            for (int64_t yo = 0; yo < ho; ++yo)
                for (int64_t xo = 0; xo < wo; ++xo) {
                    const int64_t pix_in = (yo * l.stride) * wd + xo * l.stride;
                    const double* a = tok.data() + pix_in * c_n;
                    for (int64_t f = 0; f < l.filters; ++f) {
                        const double* wf = w.data() + f * c_n;
                        double acc = 0;
                        for (int64_t c = 0; c < c_n; ++c) acc += a[c] * wf[c];
                        out.data[static_cast<size_t>(f * ho * wo + yo * wo + xo)] =
                            apply_activation(acc, l.activation);
                    }
                }
            break;
        }
        case LayerKind::MatMul: {
            const int64_t rows = l.input.rows(), cols = l.input.cols();
            const int64_t fpg = l.filters / l.groups;
            const int64_t cg = cols / l.groups;
            for (int64_t row = 0; row < rows; ++row) {
                const double* a_row = input.data.data() + row * cols;
                for (int64_t f = 0; f < l.filters; ++f) {
                    const double* a = a_row + (f / fpg) * cg;
                    const double* wf = w.data() + f * cg;
                    double acc = 0;
                    for (int64_t j = 0; j < cg; ++j) acc += a[j] * wf[j];
                    out.data[static_cast<size_t>(row * l.filters + f)] =
                        apply_activation(acc, l.activation);
                }
            }
            break;
        }
        case LayerKind::Elementwise:
            throw ExecError("not a weighted layer");
    }
    return out;
}

// Elementwise ops in the float domain; shared by the reference path and the
// quantized pipeline (which dequantizes operands first).
FloatTensor float_elementwise(const LayerSpec& l, const std::vector<FloatTensor>& ops) {
    FloatTensor out;
    switch (l.elt_op) {
        case EltOp::Identity:
            out = ops.at(0);
            break;
        case EltOp::Add: {
            out = ops.at(0);
            for (size_t k = 1; k < ops.size(); ++k) {
                if (ops[k].data.size() != out.data.size())
                    throw ExecError("add operand size mismatch on layer " +
                                    std::to_string(l.id));
                for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += ops[k].data[i];
            }
            break;
        }
        case EltOp::Div: {
            const FloatTensor& num = ops.at(0);
            const FloatTensor& den = ops.at(1);
            out = num;
            const int64_t rows = num.shape.rows(), cols = num.shape.cols();
            const int64_t dcols = den.shape.cols();
            const int64_t span = cols / dcols;
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < cols; ++c)
                    out.data[static_cast<size_t>(r * cols + c)] /=
                        den.data[static_cast<size_t>(r * dcols + c / span)] + kDivEpsilon;
            break;
        }
        case EltOp::GlobalAvgPool: {
            const int64_t c_n = l.input.channels();
            const int64_t hw = l.input.height() * l.input.width();
            out.shape = Shape::rc(1, c_n);
            out.data.resize(static_cast<size_t>(c_n));
            for (int64_t c = 0; c < c_n; ++c) {
                double acc = 0;
                for (int64_t p = 0; p < hw; ++p)
                    acc += ops.at(0).data[static_cast<size_t>(c * hw + p)];
                out.data[static_cast<size_t>(c)] = acc / static_cast<double>(hw);
            }
            break;
        }
    }
    if (l.elt_op != EltOp::GlobalAvgPool) out.shape = l.output_shape();
    if (l.activation == Activation::ReLU)
        for (auto& v : out.data) v = std::max(v, 0.0);
    return out;
}

}  // namespace

std::vector<FloatTensor> run_float_reference(const NetworkGraph& graph,
                                             const WeightStore& weights,
                                             std::span<const double> input) {
    std::vector<FloatTensor> outs(graph.layers.size());
    std::unordered_map<int, size_t> index;
    for (size_t i = 0; i < graph.layers.size(); ++i) index[graph.layers[i].id] = i;

    FloatTensor net_in;
    net_in.shape = graph.input_shape();
    net_in.data.assign(input.begin(), input.end());
    if (static_cast<int64_t>(net_in.data.size()) != net_in.shape.elements())
        throw ExecError("input size does not match network input shape");

    auto producer_tensor = [&](const LayerSpec& l, int pidx) -> const FloatTensor& {
        return outs[index.at(l.producers[static_cast<size_t>(pidx)])];
    };

    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& l = graph.layers[i];
        if (l.has_weights()) {
            const FloatTensor& src =
                l.producers.empty() ? net_in : producer_tensor(l, 0);
            outs[i] = float_weighted_layer(l, weights.layer(l.id), adapt_float(src, l));
        } else {
            std::vector<FloatTensor> ops;
            ops.reserve(l.producers.size());
            for (size_t p = 0; p < l.producers.size(); ++p) {
                const FloatTensor& src = producer_tensor(l, static_cast<int>(p));
                ops.push_back(p == 0 ? adapt_float(src, l) : src);
            }
            outs[i] = float_elementwise(l, ops);
        }
    }
    return outs;
}

double dw_weight_ablation_mse(const NetworkGraph& graph, const WeightStore& weights,
                              int dw_bits, std::span<const double> input,
                              std::span<const FloatTensor> reference) {
    if (reference.size() != graph.layers.size())
        throw ExecError("reference tensor count does not match the graph");
    WeightStore perturbed;
    for (const auto& l : graph.layers) {
        if (!l.has_weights()) continue;
        const auto w = weights.layer(l.id);
        if (l.kind != LayerKind::DWConv) {
            perturbed.set(l.id, std::vector<double>(w.begin(), w.end()));
            continue;
        }
        std::vector<double> dq(w.size());
        const int64_t per = l.filter_weight_count();
        for (int64_t f = 0; f < l.filters; ++f) {
            const auto fw = w.subspan(static_cast<size_t>(f * per),
                                      static_cast<size_t>(per));
            const QuantParams p = calibrate_affine(fw, dw_bits, Granularity::PerFilter);
            for (int64_t i = 0; i < per; ++i)
                dq[static_cast<size_t>(f * per + i)] =
                    dequantize_uniform(quantize_uniform_scalar(fw[static_cast<size_t>(i)], p), p);
        }
        perturbed.set(l.id, std::move(dq));
    }
    const auto outs = run_float_reference(graph, perturbed, input);
    const FloatTensor& got = outs.back();
    const FloatTensor& want = reference.back();
    double acc = 0;
    for (size_t i = 0; i < got.data.size(); ++i) {
        const double d = got.data[i] - want.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(got.data.size());
}

ActivationStats collect_activation_stats(const NetworkGraph& graph,
                                         const WeightStore& weights,
                                         std::span<const std::vector<double>> inputs) {
    if (inputs.empty()) throw ConfigError("calibration needs at least one input");
    ActivationStats stats;
    bool first = true;
    for (const auto& in : inputs) {
        for (double v : in) {
            if (first || v < stats.input_min) stats.input_min = v;
            if (first || v > stats.input_max) stats.input_max = v;
            first = false;
        }
        const auto outs = run_float_reference(graph, weights, in);
        for (size_t i = 0; i < graph.layers.size(); ++i) {
            const int id = graph.layers[i].id;
            auto [it, inserted] = stats.per_layer.try_emplace(
                id, std::pair<double, double>{outs[i].data.front(), outs[i].data.front()});
            for (double v : outs[i].data) {
                it->second.first = std::min(it->second.first, v);
                it->second.second = std::max(it->second.second, v);
            }
        }
    }
    return stats;
}

RunResult run_network(const NetworkGraph& graph, const WeightStore& weights,
                      const QuantPlan& plan, std::span<const double> input) {
    const auto ref = run_float_reference(graph, weights, input);
    return run_network_with_reference(graph, weights, plan, input, ref);
}

RunResult run_network_with_reference(const NetworkGraph& graph, const WeightStore& weights,
                                     const QuantPlan& plan, std::span<const double> input,
                                     std::span<const FloatTensor> ref) {
    accumulator_bounds(graph, plan);
    if (ref.size() != graph.layers.size())
        throw ExecError("reference tensor count does not match the graph");

    std::unordered_map<int, size_t> index;
    for (size_t i = 0; i < graph.layers.size(); ++i) index[graph.layers[i].id] = i;

    std::vector<IntTensor> qout(graph.layers.size());
    std::vector<FloatTensor> fout(graph.layers.size());  // float-domain layers
    std::vector<bool> is_float(graph.layers.size(), false);

    FloatTensor net_in;
    net_in.shape = graph.input_shape();
    net_in.data.assign(input.begin(), input.end());
    const IntTensor qin = quantize(net_in, plan.input_activation);

    auto float_of = [&](size_t idx) -> FloatTensor {
        return is_float[idx] ? fout[idx] : dequantize(qout[idx]);
    };

    RunResult result;
    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& l = graph.layers[i];
        const LayerPlan& lp = plan.at(l.id);

        if (l.has_weights() && lp.quantized) {
            const EncodedLayer enc = encode_layer(l, weights, lp);
            const IntTensor& src =
                l.producers.empty() ? qin : qout[index.at(l.producers[0])];
            if (!l.producers.empty() && is_float[index.at(l.producers[0])])
                throw ExecError("layer " + std::to_string(l.id) +
                                ": float-domain producer feeds a quantized layer");
            qout[i] = execute_layer(l, enc, adapt_int(src, l));
        } else if (l.has_weights()) {
            // fixed-weight float-domain layer (attention normalizer)
            const size_t p = index.at(l.producers.at(0));
            const FloatTensor in = adapt_float(float_of(p), l);
            fout[i] = float_weighted_layer(l, weights.layer(l.id), in);
            is_float[i] = true;
        } else {
            std::vector<FloatTensor> ops;
            ops.reserve(l.producers.size());
            for (size_t p = 0; p < l.producers.size(); ++p) {
                const size_t pi = index.at(l.producers[p]);
                ops.push_back(p == 0 ? adapt_float(float_of(pi), l) : float_of(pi));
            }
            qout[i] = quantize(float_elementwise(l, ops), lp.activation);
        }

        // per-layer error vs the float reference
        const FloatTensor got = is_float[i] ? fout[i] : dequantize(qout[i]);
        LayerError err;
        err.layer_id = l.id;
        double acc = 0;
        for (size_t k = 0; k < got.data.size(); ++k) {
            const double d = got.data[k] - ref[i].data[k];
            acc += d * d;
            err.max_abs = std::max(err.max_abs, std::abs(d));
        }
        err.mse = acc / static_cast<double>(got.data.size());
        result.errors.push_back(err);
    }

    const size_t last = graph.layers.size() - 1;
    result.output = is_float[last] ? fout[last] : dequantize(qout[last]);
    return result;
}

}  // namespace m2q
