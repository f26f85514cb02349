// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/netgraph.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace m2q {

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::DWConv: return "dwconv";
        case LayerKind::PWConv: return "pwconv";
        case LayerKind::MatMul: return "matmul";
        case LayerKind::Elementwise: return "elementwise";
    }
    return "?";
}

const char* to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "none";
}

const char* to_string(EltOp op) {
    switch (op) {
        case EltOp::Identity: return "identity";
        case EltOp::Add: return "add";
        case EltOp::Div: return "div";
        case EltOp::GlobalAvgPool: return "global_avg_pool";
    }
    return "?";
}

const char* to_string(LayerCategory c) {
    return c == LayerCategory::ComputationIntensive ? "computation_intensive"
                                                    : "memory_intensive";
}

std::string Shape::str() const {
    std::ostringstream os;
    os << "(";
    if (rank >= 1) os << d0;
    if (rank >= 2) os << "," << d1;
    if (rank >= 3) os << "," << d2;
    os << ")";
    return os.str();
}

Shape LayerSpec::output_shape() const {
    switch (kind) {
        case LayerKind::DWConv:
        case LayerKind::PWConv: {
            // 'same' padding: H_out = ceil(H/stride)
            const int64_t ho = ceil_div(input.height(), stride);
            const int64_t wo = ceil_div(input.width(), stride);
            return Shape::chw(filters, ho, wo);
        }
        case LayerKind::MatMul:
            return Shape::rc(input.rows(), filters);
        case LayerKind::Elementwise:
            if (elt_op == EltOp::GlobalAvgPool) {
                return Shape::rc(1, input.channels());
            }
            return input;
    }
    return input;
}

int64_t LayerSpec::mac_count() const {
    switch (kind) {
        case LayerKind::DWConv: {
            const Shape out = output_shape();
            return input.channels() * kernel_h * kernel_w * out.height() * out.width();
        }
        case LayerKind::PWConv: {
            const Shape out = output_shape();
            return input.channels() * filters * kernel_h * kernel_w * out.height() *
                   out.width();
        }
        case LayerKind::MatMul:
            return input.rows() * (input.cols() / groups) * filters;
        case LayerKind::Elementwise:
            return 0;
    }
    return 0;
}

int64_t LayerSpec::weight_count() const {
    switch (kind) {
        case LayerKind::DWConv:
            return filters * kernel_h * kernel_w;
        case LayerKind::PWConv:
            return filters * input.channels();
        case LayerKind::MatMul:
            return filters * (input.cols() / groups);
        case LayerKind::Elementwise:
            return 0;
    }
    return 0;
}

int64_t LayerSpec::filter_weight_count() const {
    return filters > 0 ? weight_count() / filters : 0;
}

int64_t NetworkGraph::total_macs() const {
    int64_t total = 0;
    for (const auto& l : layers) total += l.mac_count();
    return total;
}

const LayerSpec* NetworkGraph::find(int id) const {
    for (const auto& l : layers)
        if (l.id == id) return &l;
    return nullptr;
}

LayerCategory layer_category(const LayerSpec& layer) {
    switch (layer.kind) {
        case LayerKind::PWConv:
        case LayerKind::MatMul:
            return LayerCategory::ComputationIntensive;
        case LayerKind::DWConv:
            return LayerCategory::MemoryIntensive;
        case LayerKind::Elementwise:
            throw ConfigError("layer " + std::to_string(layer.id) +
                              ": elementwise layers are not quantizable");
    }
    throw ConfigError("unknown layer kind");
}

namespace {

void check_layer(const LayerSpec& l, std::vector<Violation>& out) {
    auto add = [&](const char* code, std::string msg) {
        out.push_back({l.id, code, std::move(msg)});
    };

    if (l.stride < 1) add("stride", "stride must be positive");
    if (l.kernel_h < 1 || l.kernel_w < 1) add("kernel", "kernel dims must be positive");
    if (l.groups < 1) add("groups", "groups must be positive");

    switch (l.kind) {
        case LayerKind::DWConv:
            if (l.input.rank != 3) add("shape", "dwconv input must be (c,h,w)");
            if (l.filters != l.input.channels())
                add("dw_filters", "dwconv filters must equal input channels (" +
                                      std::to_string(l.filters) + " vs " +
                                      std::to_string(l.input.channels()) + ")");
            break;
        case LayerKind::PWConv:
            if (l.input.rank != 3) add("shape", "pwconv input must be (c,h,w)");
            if (l.kernel_h != 1 || l.kernel_w != 1)
                add("pw_kernel", "pwconv kernel must be (1,1), got (" +
                                     std::to_string(l.kernel_h) + "," +
                                     std::to_string(l.kernel_w) + ")");
            if (l.groups != 1) add("groups", "pwconv groups must be 1");
            if (l.filters < 1) add("filters", "pwconv needs a filter count");
            break;
        case LayerKind::MatMul:
            if (l.input.rank != 2) add("shape", "matmul input must be (rows,cols)");
            if (l.filters < 1) add("filters", "matmul needs a filter count");
            if (l.input.cols() % l.groups != 0)
                add("groups", "matmul cols must divide by groups");
            if (l.filters % l.groups != 0)
                add("groups", "matmul filters must divide by groups");
            break;
        case LayerKind::Elementwise:
            break;
    }
}

}  // namespace

std::vector<Violation> validate_graph(const NetworkGraph& graph) {
    std::vector<Violation> out;

    std::unordered_map<int, size_t> position;
    std::unordered_map<int, Shape> out_shape;
    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const auto& l = graph.layers[i];
        if (position.count(l.id)) {
            out.push_back({l.id, "dup_id", "duplicate layer id"});
            continue;
        }
        position[l.id] = i;
        out_shape[l.id] = l.output_shape();
    }

    for (size_t i = 0; i < graph.layers.size(); ++i) {
        const auto& l = graph.layers[i];
        check_layer(l, out);

        if (l.producers.empty()) {
            // network input feed: conv layers consume the image directly
            if (l.input.rank == 3 && l.input != graph.input_shape()) {
                out.push_back({l.id, "input_shape",
                               "entry layer input " + l.input.str() +
                                   " does not match network input " +
                                   graph.input_shape().str()});
            }
            continue;
        }

        for (size_t pi = 0; pi < l.producers.size(); ++pi) {
            const int pid = l.producers[pi];
            auto it = position.find(pid);
            if (it == position.end()) {
                out.push_back({l.id, "producer", "producer " + std::to_string(pid) +
                                                     " does not exist"});
                continue;
            }
            if (it->second >= i) {
                out.push_back({l.id, "order", "producer " + std::to_string(pid) +
                                                  " does not precede consumer"});
                continue;
            }
            const Shape ps = out_shape[pid];
            const bool primary = (pi == 0);

            switch (l.kind) {
                case LayerKind::DWConv:
                case LayerKind::PWConv: {
                    // token-major producers (rows, cols) feed convs as
                    // (cols, h, w) with rows == h*w
                    bool ok = ps == l.input;
                    if (!ok && ps.rank == 2 && l.input.rank == 3)
                        ok = ps.cols() == l.input.channels() &&
                             ps.rows() == l.input.height() * l.input.width();
                    if (primary && !ok)
                        out.push_back({l.id, "shape_mismatch",
                                       "conv input " + l.input.str() +
                                           " != producer output " + ps.str()});
                    break;
                }
                case LayerKind::MatMul:
                    // conv outputs are reinterpreted (C,H,W) -> (H*W, C);
                    // element counts must agree for every operand.
                    if (ps.elements() != l.input.elements())
                        out.push_back({l.id, "shape_mismatch",
                                       "matmul operand element count " +
                                           std::to_string(ps.elements()) +
                                           " != input " +
                                           std::to_string(l.input.elements())});
                    break;
                case LayerKind::Elementwise:
                    if (primary) {
                        if (ps != l.input)
                            out.push_back({l.id, "shape_mismatch",
                                           "elementwise input " + l.input.str() +
                                               " != producer output " + ps.str()});
                    } else if (l.elt_op == EltOp::Add) {
                        if (ps != l.input)
                            out.push_back({l.id, "shape_mismatch",
                                           "add operand " + ps.str() + " != " +
                                               l.input.str()});
                    } else if (l.elt_op == EltOp::Div) {
                        // denominator broadcast per channel group:
                        // (rows, h) divides (rows, C) when h | C
                        const bool ok = ps.rank == l.input.rank &&
                                        ps.rows() == l.input.rows() &&
                                        ps.cols() >= 1 &&
                                        l.input.cols() % ps.cols() == 0;
                        if (!ok)
                            out.push_back({l.id, "shape_mismatch",
                                           "div denominator " + ps.str() +
                                               " not broadcastable to " +
                                               l.input.str()});
                    }
                    break;
            }
        }
    }
    return out;
}

}  // namespace m2q
