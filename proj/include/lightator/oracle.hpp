#pragma once

// Independent integer reference: plain nested loops over the quantized
// model. Shares only the IR and the quantization rules with the simulator.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "lightator/image.hpp"
#include "lightator/netir.hpp"
#include "lightator/quant.hpp"

namespace lightator::oracle {

struct OracleResult {
    std::vector<double> output;
    std::vector<std::int64_t> final_accum;
    std::size_t argmax = 0;
};

inline std::vector<std::int64_t> conv(const netir::ConvSpec& c, const netir::LayerDesc& l, const netir::Dims& in,
                                      const std::vector<std::int32_t>& x) {
    const std::size_t oh = (in.h + 2 * c.padding - c.k) / c.stride + 1;
    const std::size_t ow = (in.w + 2 * c.padding - c.k) / c.stride + 1;
    const auto w = l.qweights.levels();
    std::vector<std::int64_t> y(c.c_out * oh * ow, 0);
    for (std::size_t co = 0; co < c.c_out; ++co)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::int64_t acc = 0;
                for (std::size_t ci = 0; ci < c.c_in; ++ci)
                    for (std::size_t kr = 0; kr < c.k; ++kr)
                        for (std::size_t kc = 0; kc < c.k; ++kc) {
                            const long iy = static_cast<long>(oy * c.stride + kr) - static_cast<long>(c.padding);
                            const long ix = static_cast<long>(ox * c.stride + kc) - static_cast<long>(c.padding);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w))
                                continue;
                            const std::int64_t a = x[(ci * in.h + static_cast<std::size_t>(iy)) * in.w +
                                                     static_cast<std::size_t>(ix)];
                            acc += a * w[((co * c.c_in + ci) * c.k + kr) * c.k + kc];
                        }
                y[(co * oh + oy) * ow + ox] = acc;
            }
    return y;
}

inline std::vector<std::int64_t> fc(const netir::FcSpec& f, const netir::LayerDesc& l,
                                    const std::vector<std::int32_t>& x) {
    const auto w = l.qweights.levels();
    std::vector<std::int64_t> y(f.n_out, 0);
    for (std::size_t o = 0; o < f.n_out; ++o)
        for (std::size_t i = 0; i < f.n_in; ++i) y[o] += static_cast<std::int64_t>(x[i]) * w[o * f.n_in + i];
    return y;
}

inline std::vector<std::int64_t> pool(const netir::CaSpec& a, const netir::LayerDesc& l, const netir::Dims& in,
                                      const std::vector<std::int32_t>& x) {
    const std::size_t oh = in.h / a.pool_h;
    const std::size_t ow = in.w / a.pool_w;
    const std::size_t oc = a.fuse_grayscale ? 1 : in.c;
    const auto w = l.qweights.levels();
    std::vector<std::int64_t> y(oc * oh * ow, 0);
    for (std::size_t c = 0; c < oc; ++c)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::int64_t acc = 0;
                for (std::size_t dy = 0; dy < a.pool_h; ++dy)
                    for (std::size_t dx = 0; dx < a.pool_w; ++dx) {
                        const std::size_t iy = oy * a.pool_h + dy;
                        const std::size_t ix = ox * a.pool_w + dx;
                        const std::size_t px = dy * a.pool_w + dx;
                        if (a.fuse_grayscale) {
                            for (std::size_t j = 0; j < 3; ++j)
                                acc += static_cast<std::int64_t>(x[(j * in.h + iy) * in.w + ix]) * w[px * 3 + j];
                        } else {
                            acc += static_cast<std::int64_t>(x[(c * in.h + iy) * in.w + ix]) * w[px];
                        }
                    }
                y[(c * oh + oy) * ow + ox] = acc;
            }
    return y;
}

// A frozen act_scale on a layer replaces its ReLU calibration.
inline OracleResult oracle_inference(const netir::ModelDesc& model, const image::Frame& frame) {
    const auto dims = netir::validate_chain(model, model.input);
    if (!(frame.dims == model.input))
        fail(ErrorKind::Validation, "frame_dims",
             "frame is " + frame.dims.str() + " but the model expects " + model.input.str());
    std::vector<std::int32_t> x(frame.codes.begin(), frame.codes.end());
    double x_scale = frame.act_scale;
    netir::Dims cur = model.input;
    std::size_t last_linear = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (model.layers[i].is_linear()) last_linear = i;

    OracleResult r;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        if (l.is_activation()) continue;
        std::vector<std::int64_t> acc;
        if (const auto* c = std::get_if<netir::ConvSpec>(&l.kind))
            acc = conv(*c, l, cur, x);
        else if (const auto* f = std::get_if<netir::FcSpec>(&l.kind))
            acc = fc(*f, l, x);
        else
            acc = pool(std::get<netir::CaSpec>(l.kind), l, cur, x);

        const double in_scale = l.weight_scale() * x_scale;
        const bool has_act = i + 1 < model.layers.size() && model.layers[i + 1].is_activation();
        const bool last = i == last_linear;
        if (last && !has_act) {
            r.final_accum = acc;
            for (auto a : acc) r.output.push_back(static_cast<double>(a) * in_scale);
            break;
        }
        const auto kind = has_act ? std::get<netir::ActSpec>(model.layers[i + 1].kind).fn : quant::ActivationKind::ReLU;
        std::vector<std::int32_t> codes(acc.size());
        double scale = 0.0;
        if (kind == quant::ActivationKind::ReLU) {
            double mx = 0.0;
            for (auto a : acc) mx = std::max(mx, static_cast<double>(a) * in_scale);
            scale = l.act_scale ? *l.act_scale : (mx > 0.0 ? mx / quant::kActMax : 1.0);
            for (std::size_t k = 0; k < acc.size(); ++k) {
                const double v = std::max(static_cast<double>(acc[k]) * in_scale, 0.0);
                codes[k] = static_cast<std::int32_t>(
                    std::clamp<std::int64_t>(quant::round_half_away(v / scale), 0, quant::kActMax));
            }
        } else if (kind == quant::ActivationKind::Sign) {
            scale = quant::kSignScale;
            for (std::size_t k = 0; k < acc.size(); ++k) codes[k] = acc[k] > 0 ? quant::kActMax : 0;
        } else {
            scale = quant::kTanhScale;
            for (std::size_t k = 0; k < acc.size(); ++k)
                codes[k] = quant::TanhLut::instance().code(static_cast<double>(acc[k]) * in_scale);
        }
        if (last) {
            r.final_accum = acc;
            for (auto c : codes) r.output.push_back(c * scale);
            break;
        }
        x = std::move(codes);
        x_scale = scale;
        cur = dims[i];
    }
    r.argmax = static_cast<std::size_t>(std::max_element(r.output.begin(), r.output.end()) - r.output.begin());
    return r;
}

}  // namespace lightator::oracle
