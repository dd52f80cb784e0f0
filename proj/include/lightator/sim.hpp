#pragma once

// Frame-level scheduler: optional compressive acquisition, then every layer
// in order on the core. Between layers only 4-bit codes and their scale are
// carried, as the VCSEL driver re-emits them.

#include <algorithm>
#include <cstdint>
#include <future>
#include <optional>
#include <vector>

#include "lightator/compress_spec.hpp"
#include "lightator/core.hpp"
#include "lightator/engine.hpp"
#include "lightator/image.hpp"
#include "lightator/mapper.hpp"
#include "lightator/netir.hpp"
#include "lightator/power.hpp"
#include "lightator/quant.hpp"

namespace lightator::sim {

struct RunOptions {
    core::ExecContext exec;
    core::CoreGeometry geometry;
    bool allow_split = true;
    std::optional<compress::CompressionSpec> compress;
    power::EnergyConfig energy;
};

struct FeatureMap {
    std::size_t layer_index = 0;
    netir::Dims dims;
    quant::QTensor codes;
};

struct RunResult {
    std::vector<double> output;
    std::size_t argmax = 0;
    std::vector<std::int64_t> final_accum;
    // Codes handed to the next layer, one entry per non-final mapped layer.
    std::vector<FeatureMap> feature_maps;
    // Output code scale of every mapped layer that emits codes
    // (model layer index -> scale).
    std::vector<std::pair<std::size_t, double>> act_scales;
    std::size_t compute_cycles = 0;
    std::size_t stall_cycles = 0;
    std::size_t reprogram_events = 0;
    power::PowerReport power;
    core::ExecMode mode = core::ExecMode::Ideal;
    bool compressed = false;

    std::size_t total_cycles() const noexcept { return compute_cycles + stall_cycles; }
};

// The model actually executed: with a CA layer in front when requested.
inline netir::ModelDesc effective_model(const netir::ModelDesc& model, const RunOptions& opt) {
    return opt.compress ? netir::with_compression(model, *opt.compress) : model;
}

inline RunResult run_model(const netir::ModelDesc& model, const image::Frame& frame, const RunOptions& opt) {
    const auto dims = netir::validate_chain(model, model.input);
    if (!(frame.dims == model.input))
        fail(ErrorKind::Validation, "frame_dims",
             "frame is " + frame.dims.str() + " but the model expects " + model.input.str());

    RunResult r;
    r.mode = opt.exec.mode;
    const auto plans = mapper::plan_model(model, opt.geometry, opt.allow_split);
    r.power = power::network_report(plans, opt.energy);
    for (const auto& p : plans) {
        r.compute_cycles += p.cycles;
        r.reprogram_events += p.reprogram_events;
    }
    r.stall_cycles = r.reprogram_events * opt.energy.stall_cycles_per_swap;

    std::size_t last_linear = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (model.layers[i].is_linear()) last_linear = i;

    std::vector<std::int32_t> codes(frame.codes.begin(), frame.codes.end());
    double act_scale = frame.act_scale;
    netir::Dims cur = model.input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        if (layer.is_activation()) continue;
        auto run = engine::run_layer(layer, cur, codes, opt.exec, opt.geometry, opt.allow_split, i,
                                     core::splitmix64(i + 1));
        const double in_scale = layer.weight_scale() * act_scale;
        const bool has_act = i + 1 < model.layers.size() && model.layers[i + 1].is_activation();
        const bool last = i == last_linear;
        if (last && !has_act) {
            r.output.resize(run.accum.size());
            for (std::size_t k = 0; k < run.accum.size(); ++k)
                r.output[k] = static_cast<double>(run.accum[k]) * in_scale;
            r.final_accum = std::move(run.accum);
            break;
        }
        const auto kind =
            has_act ? std::get<netir::ActSpec>(model.layers[i + 1].kind).fn : quant::ActivationKind::ReLU;
        auto q = quant::activate_featuremap(kind, run.accum, in_scale, run.out_dims.chw(), layer.act_scale);
        r.act_scales.emplace_back(i, q.scale());
        if (last) {
            r.output.resize(q.size());
            for (std::size_t k = 0; k < q.size(); ++k) r.output[k] = q.dequantize(k);
            r.final_accum = std::move(run.accum);
            break;
        }
        codes.assign(q.levels().begin(), q.levels().end());
        act_scale = q.scale();
        cur = dims[i];
        r.feature_maps.push_back({i, cur, std::move(q)});
    }
    r.argmax = static_cast<std::size_t>(std::max_element(r.output.begin(), r.output.end()) - r.output.begin());
    return r;
}

inline RunResult run_inference(const netir::ModelDesc& model, const image::Frame& frame, const RunOptions& opt = {}) {
    if (!opt.compress) return run_model(model, frame, opt);
    auto r = run_model(effective_model(model, opt), frame, opt);
    r.compressed = true;
    return r;
}

struct BatchResult {
    std::vector<RunResult> results;
    std::size_t total_cycles = 0;
    double fps = 0.0;
};

// Frames run independently; with workers > 1 they are spread over threads
// and results keep frame order.
inline BatchResult run_batch(const netir::ModelDesc& model, const std::vector<image::Frame>& frames,
                             const RunOptions& opt = {}, unsigned workers = 1) {
    if (frames.empty()) fail(ErrorKind::Validation, "empty_batch", "no frames to run");
    const auto effective = effective_model(model, opt);
    BatchResult b;
    b.results.resize(frames.size());
    auto one = [&](std::size_t f) {
        try {
            b.results[f] = run_model(effective, frames[f], opt);
            b.results[f].compressed = opt.compress.has_value();
        } catch (const Error& e) {
            fail(e.kind(), e.code(), "frame " + std::to_string(f) + ": " + e.detail(), e.layer());
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(frames.size())));
    if (workers == 1) {
        for (std::size_t f = 0; f < frames.size(); ++f) one(f);
    } else {
        std::vector<std::future<void>> jobs;
        for (unsigned w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t f = w; f < frames.size(); f += workers) one(f);
            }));
        for (auto& j : jobs) j.get();
    }
    for (const auto& r : b.results) b.total_cycles += r.total_cycles();
    b.fps = opt.energy.core_clock_hz * static_cast<double>(frames.size()) / static_cast<double>(b.total_cycles);
    return b;
}

}  // namespace lightator::sim
