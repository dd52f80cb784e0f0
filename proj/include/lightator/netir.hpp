#pragma once

// Network intermediate representation and the JSON model manifest.
//
// Manifest layout (schema_version 1):
//
//   {
//     "schema_version": 1,
//     "name": "lenet-like",
//     "input": {"h": 28, "w": 28, "c": 1},
//     "layers": [
//       {"kind": "conv", "k": 3, "c_in": 1, "c_out": 6, "stride": 1, "padding": 1,
//        "weight_bits": 4, "blob": "conv0.f32", "weight_scale": 0.1, "act_scale": 0.2},
//       {"kind": "activation", "fn": "relu"},
//       {"kind": "ca", "pool_h": 2, "pool_w": 2, "fuse_grayscale": false},
//       {"kind": "fc", "n_in": 1176, "n_out": 10, "weight_bits": 3, "blob": "fc.f32"}
//     ]
//   }
//
// Blobs are raw little-endian float32, ordered (c_out, c_in, k_row, k_col)
// for conv and (n_out, n_in) for fc, referenced relative to the manifest.
// "weight_scale" and "act_scale" are optional; when present they are frozen.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lightator/compress_spec.hpp"
#include "lightator/error.hpp"
#include "lightator/quant.hpp"

namespace lightator::netir {

inline constexpr int kManifestSchemaVersion = 1;

struct Dims {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;

    std::size_t size() const noexcept { return h * w * c; }
    std::vector<std::size_t> chw() const { return {c, h, w}; }
    std::string str() const {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }
    bool operator==(const Dims&) const = default;
};

struct ConvSpec {
    std::size_t k = 3;
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    bool operator==(const ConvSpec&) const = default;
};

struct FcSpec {
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    bool operator==(const FcSpec&) const = default;
};

using CaSpec = compress::CompressionSpec;

struct ActSpec {
    quant::ActivationKind fn = quant::ActivationKind::ReLU;
    bool operator==(const ActSpec&) const = default;
};

using LayerKind = std::variant<ConvSpec, FcSpec, CaSpec, ActSpec>;

struct LayerDesc {
    LayerKind kind;
    int weight_bits = 4;
    std::string blob;
    // Raw real weights: from the blob for conv/fc, generated for CA.
    std::vector<double> weights;
    quant::QTensor qweights;
    std::optional<double> frozen_weight_scale;
    // Output activation scale; calibrated per run unless frozen here.
    std::optional<double> act_scale;

    bool is_conv() const { return std::holds_alternative<ConvSpec>(kind); }
    bool is_fc() const { return std::holds_alternative<FcSpec>(kind); }
    bool is_ca() const { return std::holds_alternative<CaSpec>(kind); }
    bool is_activation() const { return std::holds_alternative<ActSpec>(kind); }
    bool is_linear() const { return !is_activation(); }
    bool has_blob() const { return is_conv() || is_fc(); }

    const char* kind_name() const {
        if (is_conv()) return "conv";
        if (is_fc()) return "fc";
        if (is_ca()) return "ca";
        return "activation";
    }

    double weight_scale() const { return qweights.scale(); }

    // Length of one output's dot product.
    std::size_t dot_length() const {
        if (const auto* c = std::get_if<ConvSpec>(&kind)) return c->k * c->k * c->c_in;
        if (const auto* f = std::get_if<FcSpec>(&kind)) return f->n_in;
        if (const auto* a = std::get_if<CaSpec>(&kind)) return a->dot_length();
        return 0;
    }

    std::size_t expected_weight_count() const {
        if (const auto* c = std::get_if<ConvSpec>(&kind)) return c->c_out * dot_length();
        if (const auto* f = std::get_if<FcSpec>(&kind)) return f->n_out * f->n_in;
        if (is_ca()) return dot_length();
        return 0;
    }
};

struct ModelDesc {
    std::string name;
    Dims input;
    std::vector<LayerDesc> layers;
};

// Output dims of a single layer, or a located shape error.
inline Dims layer_output_dims(const LayerDesc& layer, const Dims& in, std::size_t index) {
    auto mismatch = [&](const std::string& msg) -> Dims {
        fail(ErrorKind::Validation, "shape_mismatch", msg, index);
    };
    if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
        if (c->k == 0 || c->stride == 0 || c->c_out == 0) return mismatch("conv needs k, stride, c_out >= 1");
        if (in.c != c->c_in)
            return mismatch("expected " + std::to_string(c->c_in) + " input channels, got " +
                            std::to_string(in.c));
        if (in.h + 2 * c->padding < c->k || in.w + 2 * c->padding < c->k)
            return mismatch("kernel " + std::to_string(c->k) + " larger than padded input " + in.str());
        return {(in.h + 2 * c->padding - c->k) / c->stride + 1,
                (in.w + 2 * c->padding - c->k) / c->stride + 1, c->c_out};
    }
    if (const auto* f = std::get_if<FcSpec>(&layer.kind)) {
        if (f->n_out == 0) return mismatch("fc needs n_out >= 1");
        if (in.size() != f->n_in)
            return mismatch("fc expects " + std::to_string(f->n_in) + " inputs, got " +
                            std::to_string(in.size()) + " (" + in.str() + ")");
        return {1, 1, f->n_out};
    }
    if (const auto* a = std::get_if<CaSpec>(&layer.kind)) {
        if (a->pool_h == 0 || a->pool_w == 0) return mismatch("pool dims must be >= 1");
        if (in.h % a->pool_h != 0 || in.w % a->pool_w != 0)
            return mismatch("input " + in.str() + " not divisible by pool " +
                            std::to_string(a->pool_h) + "x" + std::to_string(a->pool_w));
        if (a->fuse_grayscale && in.c != 3)
            return mismatch("grayscale fusion needs 3 input channels, got " + std::to_string(in.c));
        return {in.h / a->pool_h, in.w / a->pool_w, a->fuse_grayscale ? 1 : in.c};
    }
    return in;
}

// Output dims of every layer for the given input.
inline std::vector<Dims> validate_chain(const ModelDesc& model, const Dims& input) {
    if (model.layers.empty()) fail(ErrorKind::Validation, "empty_model", "model has no layers");
    std::vector<Dims> out;
    Dims cur = input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        if (layer.is_activation() && (i == 0 || !model.layers[i - 1].is_linear()))
            fail(ErrorKind::Validation, "dangling_activation",
                 "activation must directly follow a conv, fc or ca layer", i);
        cur = layer_output_dims(layer, cur, i);
        out.push_back(cur);
    }
    return out;
}

// Weight bits of the first conv/fc layer; CA layers borrow it.
inline int first_weighted_bits(const ModelDesc& model) {
    for (const auto& l : model.layers)
        if (l.has_blob()) return l.weight_bits;
    for (const auto& l : model.layers)
        if (l.is_ca()) return l.weight_bits;
    return 4;
}

// Derives quantized weights from the raw weights and weight_bits (and, for
// CA layers, the raw weights from the pooling spec).
inline void quantize_layer(LayerDesc& l, std::size_t i = 0) {
    if (l.is_activation()) return;
    if (const auto* ca = std::get_if<CaSpec>(&l.kind)) l.weights = compress::fused_weights(*ca);
    quant::check_weight_bits(l.weight_bits);
    if (l.weights.size() != l.expected_weight_count())
        fail(ErrorKind::Validation, "length_mismatch",
             "expected " + std::to_string(l.expected_weight_count()) + " weights, got " +
                 std::to_string(l.weights.size()),
             i);
    quant::QuantSpec spec = quant::make_weight_qspec(l.weights, l.weight_bits);
    if (l.frozen_weight_scale) spec.weight_scale = *l.frozen_weight_scale;
    const std::size_t rows = l.weights.size() / l.dot_length();
    l.qweights = quant::quantize_weights(l.weights, {rows, l.dot_length()}, spec);
}

// Quantizes every linear layer; CA layers take the first conv/fc precision.
inline void quantize_model(ModelDesc& model) {
    const int ca_bits = first_weighted_bits(model);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto& l = model.layers[i];
        if (l.is_ca()) l.weight_bits = ca_bits;
        quantize_layer(l, i);
    }
}

// Per-layer precision override. bits[i] applies to the i-th conv/fc layer;
// the last entry repeats. Frozen weight scales are dropped when bits change.
inline void apply_precision(ModelDesc& model, const std::vector<int>& bits) {
    if (bits.empty()) return;
    std::size_t k = 0;
    for (auto& l : model.layers) {
        if (!l.has_blob()) continue;
        const int b = bits[std::min(k, bits.size() - 1)];
        quant::check_weight_bits(b);
        if (b != l.weight_bits) l.frozen_weight_scale.reset();
        l.weight_bits = b;
        ++k;
    }
    quantize_model(model);
}

// A copy with a CA layer in front; the input grows to the sensor frame.
inline ModelDesc with_compression(const ModelDesc& model, const compress::CompressionSpec& spec) {
    ModelDesc out = model;
    if (spec.fuse_grayscale && model.input.c != 1)
        fail(ErrorKind::Validation, "shape_mismatch",
             "grayscale compression feeds 1 channel but the model expects " +
                 std::to_string(model.input.c),
             0);
    out.input = {model.input.h * spec.pool_h, model.input.w * spec.pool_w,
                 spec.fuse_grayscale ? 3 : model.input.c};
    LayerDesc ca;
    ca.kind = spec;
    out.layers.insert(out.layers.begin(), ca);
    quantize_model(out);
    return out;
}

namespace detail {

inline std::vector<double> read_f32_blob(const std::filesystem::path& path, std::size_t index) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "missing_blob", "cannot open weight blob " + path.string(), index);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0)
        fail(ErrorKind::Validation, "length_mismatch",
             "blob " + path.string() + " size is not a multiple of 4 bytes", index);
    std::vector<double> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 3; b >= 0; --b)
            u = (u << 8) | static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)]);
        out[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return out;
}

inline void write_f32_blob(const std::filesystem::path& path, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "write_failed", "cannot write " + path.string());
    for (double v : values) {
        const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                           static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
        out.write(b, 4);
    }
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, std::optional<std::size_t> index) {
    if (!j.contains(key))
        fail(ErrorKind::Parse, "missing_field", std::string("missing field '") + key + "'", index);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "bad_field", std::string("field '") + key + "': " + e.what(), index);
    }
}

template <typename T>
T get_field_or(const nlohmann::json& j, const char* key, T fallback, std::size_t index) {
    return j.contains(key) ? get_field<T>(j, key, index) : fallback;
}

inline LayerDesc parse_layer(const nlohmann::json& j, std::size_t i) {
    if (!j.is_object()) fail(ErrorKind::Parse, "bad_layer", "layer entry must be an object", i);
    const auto kind = get_field<std::string>(j, "kind", i);
    LayerDesc l;
    if (kind == "conv") {
        ConvSpec c;
        c.k = get_field<std::size_t>(j, "k", i);
        c.c_in = get_field<std::size_t>(j, "c_in", i);
        c.c_out = get_field<std::size_t>(j, "c_out", i);
        c.stride = get_field_or<std::size_t>(j, "stride", 1, i);
        c.padding = get_field_or<std::size_t>(j, "padding", 0, i);
        l.kind = c;
    } else if (kind == "fc") {
        l.kind = FcSpec{get_field<std::size_t>(j, "n_in", i), get_field<std::size_t>(j, "n_out", i)};
    } else if (kind == "ca") {
        CaSpec a;
        a.pool_h = get_field<std::size_t>(j, "pool_h", i);
        a.pool_w = get_field<std::size_t>(j, "pool_w", i);
        a.fuse_grayscale = get_field_or<bool>(j, "fuse_grayscale", false, i);
        l.kind = a;
    } else if (kind == "activation") {
        l.kind = ActSpec{quant::parse_activation(get_field<std::string>(j, "fn", i))};
    } else {
        fail(ErrorKind::Validation, "unknown_layer_kind", "unknown layer kind '" + kind + "'", i);
    }
    if (l.has_blob()) {
        l.weight_bits = get_field_or<int>(j, "weight_bits", 4, i);
        l.blob = get_field<std::string>(j, "blob", i);
        if (j.contains("weight_scale")) l.frozen_weight_scale = get_field<double>(j, "weight_scale", i);
    }
    if (l.is_linear() && j.contains("act_scale")) l.act_scale = get_field<double>(j, "act_scale", i);
    return l;
}

}  // namespace detail

// Reads, validates and quantizes a manifest and all of its blobs.
inline ModelDesc load_model(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorKind::Io, "missing_manifest", "cannot open " + manifest_path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, "bad_json", manifest_path.string() + ": " + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::Parse, "bad_manifest", "manifest must be a JSON object");
    const int version = detail::get_field<int>(doc, "schema_version", std::nullopt);
    if (version != kManifestSchemaVersion)
        fail(ErrorKind::Parse, "schema_version", "unsupported manifest schema " + std::to_string(version));

    ModelDesc model;
    model.name = doc.value("name", std::string{});
    const auto& input = detail::get_field<nlohmann::json>(doc, "input", std::nullopt);
    model.input = {detail::get_field<std::size_t>(input, "h", std::nullopt),
                   detail::get_field<std::size_t>(input, "w", std::nullopt),
                   detail::get_field<std::size_t>(input, "c", std::nullopt)};
    const auto layers = detail::get_field<nlohmann::json>(doc, "layers", std::nullopt);
    if (!layers.is_array()) fail(ErrorKind::Parse, "bad_manifest", "'layers' must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) model.layers.push_back(detail::parse_layer(layers[i], i));

    validate_chain(model, model.input);

    const auto base = manifest_path.parent_path();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto& l = model.layers[i];
        if (!l.has_blob()) continue;
        l.weights = detail::read_f32_blob(base / l.blob, i);
    }
    quantize_model(model);
    return model;
}

inline nlohmann::ordered_json manifest_json(const ModelDesc& model) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kManifestSchemaVersion;
    doc["name"] = model.name;
    doc["input"] = {{"h", model.input.h}, {"w", model.input.w}, {"c", model.input.c}};
    auto layers = nlohmann::ordered_json::array();
    for (const auto& l : model.layers) {
        nlohmann::ordered_json j;
        j["kind"] = l.kind_name();
        if (const auto* c = std::get_if<ConvSpec>(&l.kind)) {
            j["k"] = c->k;
            j["c_in"] = c->c_in;
            j["c_out"] = c->c_out;
            j["stride"] = c->stride;
            j["padding"] = c->padding;
        } else if (const auto* f = std::get_if<FcSpec>(&l.kind)) {
            j["n_in"] = f->n_in;
            j["n_out"] = f->n_out;
        } else if (const auto* a = std::get_if<CaSpec>(&l.kind)) {
            j["pool_h"] = a->pool_h;
            j["pool_w"] = a->pool_w;
            j["fuse_grayscale"] = a->fuse_grayscale;
        } else {
            j["fn"] = quant::to_string(std::get<ActSpec>(l.kind).fn);
        }
        if (l.has_blob()) {
            j["weight_bits"] = l.weight_bits;
            j["blob"] = l.blob;
            j["weight_scale"] = l.qweights.scale();
        }
        if (l.act_scale) j["act_scale"] = *l.act_scale;
        layers.push_back(std::move(j));
    }
    doc["layers"] = std::move(layers);
    return doc;
}

// Writes the manifest (with current scales) and, optionally, the blobs.
inline void save_model(const ModelDesc& model, const std::filesystem::path& manifest_path,
                       bool write_blobs = true) {
    const auto base = manifest_path.parent_path();
    if (!base.empty()) std::filesystem::create_directories(base);
    if (write_blobs) {
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
            const auto& l = model.layers[i];
            if (!l.has_blob()) continue;
            if (l.blob.empty()) fail(ErrorKind::Validation, "missing_blob", "layer has no blob name", i);
            detail::write_f32_blob(base / l.blob, l.weights);
        }
    }
    std::ofstream out(manifest_path);
    if (!out) fail(ErrorKind::Io, "write_failed", "cannot write " + manifest_path.string());
    out << manifest_json(model).dump(2) << "\n";
}

}  // namespace lightator::netir
