// Copyright (C) 2026 the m2q project
// SPDX-License-Identifier: Apache-2.0

#include "m2q/model_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace m2q {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

LayerKind kind_from_string(const std::string& s, int layer_id) {
    if (s == "dwconv") return LayerKind::DWConv;
    if (s == "pwconv") return LayerKind::PWConv;
    if (s == "matmul") return LayerKind::MatMul;
    if (s == "elementwise") return LayerKind::Elementwise;
    throw ParseError("layer " + std::to_string(layer_id) + ": unknown kind '" + s + "'");
}

EltOp elt_from_string(const std::string& s, int layer_id) {
    if (s == "identity") return EltOp::Identity;
    if (s == "add") return EltOp::Add;
    if (s == "div") return EltOp::Div;
    if (s == "global_avg_pool") return EltOp::GlobalAvgPool;
    throw ParseError("layer " + std::to_string(layer_id) + ": unknown elt_op '" + s + "'");
}

template <typename T>
T field(const ordered_json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ctx + ": bad field '" + key + "': " + e.what());
    }
}

}  // namespace

LoadedModel load_model(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ParseError("cannot open model manifest: " + manifest_path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path + ": invalid JSON: " + std::string(e.what()));
    }

    LoadedModel model;
    NetworkGraph& g = model.graph;
    g.name = field<std::string>(j, "name", manifest_path);
    const auto res = field<std::vector<int>>(j, "input_resolution", manifest_path);
    if (res.size() != 2) throw ParseError(manifest_path + ": input_resolution must be [h,w]");
    g.input_h = res[0];
    g.input_w = res[1];
    g.input_channels = j.value("input_channels", 3);

    std::vector<char> blob;
    if (j.contains("weights_blob")) {
        const fs::path blob_path =
            fs::path(manifest_path).parent_path() / j.at("weights_blob").get<std::string>();
        std::ifstream bin(blob_path, std::ios::binary);
        if (!bin) throw ParseError("cannot open weight blob: " + blob_path.string());
        blob.assign(std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>());
        model.weights.emplace();
    }

    if (!j.contains("layers")) throw ParseError(manifest_path + ": missing 'layers'");
    for (const auto& lj : j.at("layers")) {
        LayerSpec l;
        const std::string ctx =
            manifest_path + ": layer " + std::to_string(lj.value("id", -1));
        l.id = field<int>(lj, "id", ctx);
        l.kind = kind_from_string(field<std::string>(lj, "kind", ctx), l.id);

        const auto shape = field<std::vector<int64_t>>(lj, "input_shape", ctx);
        if (shape.size() == 2) {
            l.input = Shape::rc(shape[0], shape[1]);
        } else if (shape.size() == 3) {
            l.input = Shape::chw(shape[0], shape[1], shape[2]);
        } else {
            throw ParseError(ctx + ": input_shape must be [rows,cols] or [c,h,w]");
        }
        if (l.kind == LayerKind::MatMul && l.input.rank != 2)
            throw ParseError(ctx + ": matmul input_shape must be [rows,cols]");
        if ((l.kind == LayerKind::DWConv || l.kind == LayerKind::PWConv) &&
            l.input.rank != 3)
            throw ParseError(ctx + ": conv input_shape must be [c,h,w]");

        if (lj.contains("kernel")) {
            const auto k = field<std::vector<int>>(lj, "kernel", ctx);
            if (k.size() != 2) throw ParseError(ctx + ": kernel must be [kh,kw]");
            l.kernel_h = k[0];
            l.kernel_w = k[1];
        }
        l.filters = lj.value("filters", int64_t{0});
        l.stride = lj.value("stride", 1);
        l.groups = lj.value("groups", 1);
        l.producers = lj.value("producers", std::vector<int>{});
        const std::string act = lj.value("activation", "none");
        if (act != "none" && act != "relu") throw ParseError(ctx + ": unknown activation '" + act + "'");
        l.activation = act == "relu" ? Activation::ReLU : Activation::None;
        if (lj.contains("elt_op"))
            l.elt_op = elt_from_string(lj.at("elt_op").get<std::string>(), l.id);
        l.quantize_weights = lj.value("quantize", true);
        l.name = lj.value("name", std::string{});

        if (model.weights && l.has_weights()) {
            if (!lj.contains("weights"))
                throw ParseError(ctx + ": blob present but layer has no weights ref");
            const auto& wj = lj.at("weights");
            const size_t offset = field<size_t>(wj, "offset", ctx);
            const size_t length = field<size_t>(wj, "length", ctx);
            const size_t expect = static_cast<size_t>(l.weight_count()) * 4;
            if (length != expect)
                throw ParseError(ctx + ": weight length " + std::to_string(length) +
                                 " != expected " + std::to_string(expect) + " bytes");
            if (offset + length > blob.size())
                throw ParseError(ctx + ": weight ref past end of blob");
            std::vector<double> w(length / 4);
            for (size_t i = 0; i < w.size(); ++i) {
                // little-endian float32
                uint32_t bits = 0;
                std::memcpy(&bits, blob.data() + offset + i * 4, 4);
                float f = 0;
                std::memcpy(&f, &bits, 4);
                w[i] = static_cast<double>(f);
            }
            model.weights->set(l.id, std::move(w));
        }

        g.layers.push_back(std::move(l));
    }
    return model;
}

void save_model(const NetworkGraph& graph, const std::string& manifest_path,
                const WeightStore* weights) {
    ordered_json j;
    j["name"] = graph.name;
    j["input_resolution"] = {graph.input_h, graph.input_w};
    j["input_channels"] = graph.input_channels;

    std::string blob_name;
    std::ofstream blob;
    size_t blob_offset = 0;
    if (weights) {
        blob_name = fs::path(manifest_path).stem().string() + ".weights.bin";
        const fs::path blob_path = fs::path(manifest_path).parent_path() / blob_name;
        blob.open(blob_path, std::ios::binary);
        if (!blob) throw ParseError("cannot write weight blob: " + blob_path.string());
        j["weights_blob"] = blob_name;
    }

    j["layers"] = ordered_json::array();
    for (const auto& l : graph.layers) {
        ordered_json lj;
        lj["id"] = l.id;
        lj["kind"] = to_string(l.kind);
        if (l.input.rank == 2)
            lj["input_shape"] = {l.input.rows(), l.input.cols()};
        else
            lj["input_shape"] = {l.input.channels(), l.input.height(), l.input.width()};
        lj["kernel"] = {l.kernel_h, l.kernel_w};
        lj["filters"] = l.filters;
        lj["stride"] = l.stride;
        lj["groups"] = l.groups;
        lj["producers"] = l.producers;
        lj["activation"] = to_string(l.activation);
        if (l.kind == LayerKind::Elementwise) lj["elt_op"] = to_string(l.elt_op);
        if (!l.quantize_weights) lj["quantize"] = false;
        if (!l.name.empty()) lj["name"] = l.name;

        if (weights && l.has_weights()) {
            const auto w = weights->layer(l.id);
            lj["weights"] = {{"offset", blob_offset}, {"length", w.size() * 4}};
            for (double v : w) {
                const float f = static_cast<float>(v);
                uint32_t bits = 0;
                std::memcpy(&bits, &f, 4);
                char bytes[4];
                std::memcpy(bytes, &bits, 4);
                blob.write(bytes, 4);
            }
            blob_offset += w.size() * 4;
        }
        j["layers"].push_back(std::move(lj));
    }

    std::ofstream out(manifest_path);
    if (!out) throw ParseError("cannot write model manifest: " + manifest_path);
    out << j.dump(2) << "\n";
}

}  // namespace m2q
