#pragma once

// Compressive acquisition of a sensor frame: fused grayscale conversion and
// mean pooling, either through the optical core or on a digital reference.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lightator/compress_spec.hpp"
#include "lightator/engine.hpp"
#include "lightator/image.hpp"
#include "lightator/netir.hpp"

namespace lightator::compress {

enum class Path { Optical, Reference };

inline const char* to_string(Path p) { return p == Path::Optical ? "optical" : "reference"; }

inline Path parse_path(const std::string& s) {
    if (s == "optical") return Path::Optical;
    if (s == "reference") return Path::Reference;
    fail(ErrorKind::Validation, "unknown_path", "unknown compression path '" + s + "'");
}

inline netir::Dims output_dims(const netir::Dims& in, const CompressionSpec& spec) {
    netir::LayerDesc l;
    l.kind = spec;
    return netir::layer_output_dims(l, in, 0);
}

// Exact weighted window sums of integer samples (CHW), as numerators over
// integer_weights(spec).divisor.
template <typename Sample>
std::vector<std::int64_t> reference_sums(std::span<const Sample> chw, const netir::Dims& in,
                                         const CompressionSpec& spec) {
    const auto out = output_dims(in, spec);
    if (chw.size() != in.size()) fail(ErrorKind::Validation, "frame_size", "sample count does not match dims");
    const auto iw = integer_weights(spec);
    std::vector<std::int64_t> sums(out.size(), 0);
    for (std::size_t c = 0; c < out.c; ++c)
        for (std::size_t oy = 0; oy < out.h; ++oy)
            for (std::size_t ox = 0; ox < out.w; ++ox) {
                std::int64_t acc = 0;
                std::size_t k = 0;
                for (std::size_t dy = 0; dy < spec.pool_h; ++dy)
                    for (std::size_t dx = 0; dx < spec.pool_w; ++dx) {
                        const std::size_t y = oy * spec.pool_h + dy;
                        const std::size_t x = ox * spec.pool_w + dx;
                        if (spec.fuse_grayscale) {
                            for (std::size_t j = 0; j < 3; ++j)
                                acc += iw.numerators[k++] * static_cast<std::int64_t>(chw[(j * in.h + y) * in.w + x]);
                        } else {
                            acc += iw.numerators[k++] * static_cast<std::int64_t>(chw[(c * in.h + y) * in.w + x]);
                        }
                    }
                sums[(c * out.h + oy) * out.w + ox] = acc;
            }
    return sums;
}

// Weighted window means of integer samples, one division per output.
template <typename Sample>
std::vector<double> compress_reference(std::span<const Sample> chw, const netir::Dims& in,
                                       const CompressionSpec& spec) {
    const auto sums = reference_sums(chw, in, spec);
    const double divisor = static_cast<double>(integer_weights(spec).divisor);
    std::vector<double> out(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) out[i] = static_cast<double>(sums[i]) / divisor;
    return out;
}

struct CompressResult {
    netir::Dims dims;
    // Compressed intensities in the frame's real-valued domain (code * act_scale).
    std::vector<double> values;
    Path path = Path::Reference;
    int weight_bits = 4;
    // Quantization step of the CA weights (optical path).
    double weight_scale = 0.0;
    // Raw accumulators of the optical path.
    std::vector<std::int64_t> accum;
};

// The CA layer as it is mapped onto the core.
inline netir::LayerDesc ca_layer(const CompressionSpec& spec, int weight_bits) {
    netir::LayerDesc l;
    l.kind = spec;
    l.weight_bits = weight_bits;
    netir::quantize_layer(l);
    return l;
}

inline CompressResult compress_frame(const image::Frame& frame, const CompressionSpec& spec, Path path,
                                     int weight_bits = 4, const core::ExecContext& ctx = {},
                                     const core::CoreGeometry& geometry = {}) {
    CompressResult r;
    r.dims = output_dims(frame.dims, spec);
    r.path = path;
    r.weight_bits = weight_bits;
    if (path == Path::Reference) {
        r.values = compress_reference<std::uint8_t>(frame.codes, frame.dims, spec);
        for (auto& v : r.values) v *= frame.act_scale;
        return r;
    }
    const auto layer = ca_layer(spec, weight_bits);
    std::vector<std::int32_t> acts(frame.codes.begin(), frame.codes.end());
    auto run = engine::run_layer(layer, frame.dims, acts, ctx, geometry);
    r.weight_scale = layer.weight_scale();
    r.values.resize(run.accum.size());
    for (std::size_t i = 0; i < run.accum.size(); ++i)
        r.values[i] = static_cast<double>(run.accum[i]) * r.weight_scale * frame.act_scale;
    r.accum = std::move(run.accum);
    return r;
}

// Largest optical/reference gap per output: each input p_i meets a weight
// that is off by at most half a quantization step.
inline std::vector<double> quantization_bound(const image::Frame& frame, const CompressionSpec& spec,
                                              double weight_scale) {
    const auto dims = output_dims(frame.dims, spec);
    std::vector<double> out(dims.size(), 0.0);
    for (std::size_t c = 0; c < dims.c; ++c)
        for (std::size_t oy = 0; oy < dims.h; ++oy)
            for (std::size_t ox = 0; ox < dims.w; ++ox) {
                double s = 0.0;
                for (std::size_t dy = 0; dy < spec.pool_h; ++dy)
                    for (std::size_t dx = 0; dx < spec.pool_w; ++dx) {
                        const std::size_t y = oy * spec.pool_h + dy;
                        const std::size_t x = ox * spec.pool_w + dx;
                        const std::size_t first = spec.fuse_grayscale ? 0 : c;
                        const std::size_t last = spec.fuse_grayscale ? 3 : c + 1;
                        for (std::size_t j = first; j < last; ++j)
                            s += std::abs(frame.at(j, y, x) * frame.act_scale);
                    }
                out[(c * dims.h + oy) * dims.w + ox] = s * weight_scale / 2.0;
            }
    return out;
}

// Real-valued intensities in [0, 1] to 8-bit gray.
inline std::vector<std::uint8_t> to_gray8(std::span<const double> values) {
    std::vector<std::uint8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(values[i] * 255.0), 0L, 255L));
    return out;
}

}  // namespace lightator::compress
