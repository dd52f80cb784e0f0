#pragma once

// Runs one conv/fc/ca layer on the core: every cycle of the layer schedule
// becomes a set of bank loads, and stride results are accumulated per output
// element in a digital int64 accumulator.

#include <cstdint>
#include <span>
#include <vector>

#include "lightator/core.hpp"
#include "lightator/mapper.hpp"
#include "lightator/netir.hpp"
#include "lightator/quant.hpp"

namespace lightator::engine {

// Activation codes of one job's dot product, in kernel order.
class Gatherer {
public:
    Gatherer(const netir::LayerDesc& layer, const netir::Dims& in, std::span<const std::int32_t> acts,
             std::size_t index = 0)
        : layer_(layer), in_(in), out_(netir::layer_output_dims(layer, in, index)), acts_(acts) {
        if (acts.size() != in.size())
            fail(ErrorKind::Validation, "activation_size",
                 "layer input has " + std::to_string(acts.size()) + " codes, expected " +
                     std::to_string(in.size()),
                 index);
    }

    const netir::Dims& output_dims() const noexcept { return out_; }

    std::int32_t operator()(std::size_t job, std::size_t e) const {
        if (const auto* c = std::get_if<netir::ConvSpec>(&layer_.kind)) {
            const std::size_t pos = job % (out_.h * out_.w);
            const std::size_t oy = pos / out_.w;
            const std::size_t ox = pos % out_.w;
            const std::size_t ci = e / (c->k * c->k);
            const std::size_t kr = (e / c->k) % c->k;
            const std::size_t kc = e % c->k;
            const std::size_t py = oy * c->stride + kr;
            const std::size_t px = ox * c->stride + kc;
            if (py < c->padding || px < c->padding) return 0;
            const std::size_t iy = py - c->padding;
            const std::size_t ix = px - c->padding;
            if (iy >= in_.h || ix >= in_.w) return 0;
            return acts_[(ci * in_.h + iy) * in_.w + ix];
        }
        if (std::holds_alternative<netir::FcSpec>(layer_.kind)) return acts_[e];
        const auto& a = std::get<netir::CaSpec>(layer_.kind);
        const std::size_t pos = job % (out_.h * out_.w);
        const std::size_t oy = pos / out_.w;
        const std::size_t ox = pos % out_.w;
        std::size_t pixel = e;
        std::size_t ch = job / (out_.h * out_.w);
        if (a.fuse_grayscale) {
            pixel = e / 3;
            ch = e % 3;
        }
        const std::size_t iy = oy * a.pool_h + pixel / a.pool_w;
        const std::size_t ix = ox * a.pool_w + pixel % a.pool_w;
        return acts_[(ch * in_.h + iy) * in_.w + ix];
    }

private:
    const netir::LayerDesc& layer_;
    netir::Dims in_;
    netir::Dims out_;
    std::span<const std::int32_t> acts_;
};

struct LayerRun {
    std::vector<std::int64_t> accum;
    netir::Dims out_dims;
    std::size_t cycles = 0;
    std::size_t multiplies = 0;
};

// layer_seed decorrelates device noise between layers; each cycle derives
// its own seed from it.
inline LayerRun run_layer(const netir::LayerDesc& layer, const netir::Dims& in,
                          std::span<const std::int32_t> acts, const core::ExecContext& ctx,
                          const core::CoreGeometry& geometry = {}, bool allow_split = true,
                          std::size_t index = 0, std::uint64_t layer_seed = 0) {
    try {
        const Gatherer gather(layer, in, acts, index);
        const mapper::LayerSchedule sched(mapper::layer_shape(layer, in, index), geometry, allow_split);
        const auto& shape = sched.shape();
        const auto weights = layer.qweights.levels();
        const int max_level = quant::weight_level_max(layer.weight_bits);

        LayerRun run;
        run.out_dims = gather.output_dims();
        run.accum.assign(shape.jobs, 0);
        run.cycles = sched.cycles();

        const std::size_t slots = core::kArmsPerBank;
        std::vector<std::ptrdiff_t> lookup(geometry.n_banks() * slots);
        std::vector<core::BankLoad> loads;
        for (std::size_t cycle = 0; cycle < sched.cycles(); ++cycle) {
            const auto placements = sched.placements(cycle);
            std::size_t used = 0;
            for (const auto& p : placements) used = std::max(used, p.bank + 1);
            loads.assign(used, core::BankLoad{});
            std::fill(lookup.begin(), lookup.end(), -1);
            for (auto& l : loads) {
                l.summation = sched.bank_summation();
                l.weight_max_level = max_level;
            }
            for (std::size_t i = 0; i < placements.size(); ++i) {
                const auto& p = placements[i];
                lookup[p.bank * slots + p.slot] = static_cast<std::ptrdiff_t>(i);
                const std::size_t row = shape.kernel_id(p.job) * shape.dot_length;
                for (std::size_t e = 0; e < p.length; ++e) {
                    auto& arm = loads[p.bank].arms[p.first_arm + e / core::kMrsPerArm];
                    const std::size_t ch = e % core::kMrsPerArm;
                    const std::size_t elem = p.elem_offset + e;
                    arm.weights[ch] = photonics::MRAssignment::active(ch, weights[row + elem]);
                    arm.acts[ch] = static_cast<std::uint8_t>(gather(p.job, elem));
                }
            }
            core::ExecContext cyc = ctx;
            cyc.cycle_seed = core::splitmix64(layer_seed ^ core::splitmix64(cycle));
            const auto result = core::execute_core_cycle(loads, cyc, geometry);
            run.multiplies += result.multiplies;
            for (const auto& r : result.results) {
                const auto idx = lookup[r.bank * slots + r.slot];
                if (idx < 0) continue;
                run.accum[placements[static_cast<std::size_t>(idx)].job] += r.level;
            }
        }
        return run;
    } catch (const Error& e) {
        throw e.at_layer(index);
    }
}

}  // namespace lightator::engine
