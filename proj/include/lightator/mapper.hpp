#pragma once

// Layer -> core placement.
//
// A layer is a list of jobs (one dot product per output element). Each job
// is segmented into arms of 9 rings. Short jobs (<= 6 arms) occupy a slot of
// a bank; banks are split into 6, 2 or 1 slots by the summation section.
// Longer jobs span several banks whose outputs are added digitally, and jobs
// longer than the whole core are split over consecutive cycles.
//
// Convolutions are channel-aligned: every output channel starts on a fresh
// bank and all slots of a bank carry the same kernel. Fully connected and
// compressive-acquisition layers are packed densely.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lightator/core.hpp"
#include "lightator/error.hpp"
#include "lightator/netir.hpp"

namespace lightator::mapper {

using core::CoreGeometry;
using core::kArmsPerBank;
using core::kMrsPerArm;
using core::kMrsPerBank;

enum class StrideSummation { Bypass, Stage1, Stage1And2, MultiBank };

inline const char* to_string(StrideSummation s) {
    switch (s) {
    case StrideSummation::Bypass: return "bypass";
    case StrideSummation::Stage1: return "stage1";
    case StrideSummation::Stage1And2: return "stage1and2";
    case StrideSummation::MultiBank: return "multibank";
    }
    return "?";
}

struct StridePlan {
    std::size_t dot_length = 0;
    std::size_t arms_per_stride = 0;
    StrideSummation summation = StrideSummation::Bypass;
    std::size_t unused_mrs_per_stride = 0;

    bool bank_aligned() const noexcept { return summation != StrideSummation::MultiBank; }
};

inline StridePlan plan_stride(std::size_t dot_length) {
    if (dot_length == 0) fail(ErrorKind::Mapping, "empty_layer", "dot product length must be >= 1");
    StridePlan p;
    p.dot_length = dot_length;
    p.arms_per_stride = (dot_length + kMrsPerArm - 1) / kMrsPerArm;
    p.unused_mrs_per_stride = p.arms_per_stride * kMrsPerArm - dot_length;
    if (p.arms_per_stride == 1)
        p.summation = StrideSummation::Bypass;
    else if (p.arms_per_stride <= 3)
        p.summation = StrideSummation::Stage1;
    else if (p.arms_per_stride <= kArmsPerBank)
        p.summation = StrideSummation::Stage1And2;
    else
        p.summation = StrideSummation::MultiBank;
    return p;
}

inline std::size_t strides_per_bank(const StridePlan& plan) {
    if (!plan.bank_aligned())
        fail(ErrorKind::Mapping, "multibank_stride",
             "stride of " + std::to_string(plan.arms_per_stride) +
                 " arms spans several banks; use plan_multibank");
    // One stride per summation output: a 2-arm stride still takes a 3-arm group.
    return plan.summation == StrideSummation::Bypass ? 6 : plan.summation == StrideSummation::Stage1 ? 2 : 1;
}

struct MultiBankPlan {
    std::size_t banks_per_stride = 0;
    // 0 when a single stride exceeds the core.
    std::size_t strides_per_load = 0;
    // Sequential cycles per stride; > 1 only when a stride exceeds the core.
    std::size_t partial_cycles = 1;
    bool split() const noexcept { return partial_cycles > 1; }
};

inline MultiBankPlan plan_multibank(std::size_t dot_length, const CoreGeometry& geometry = {}) {
    const auto stride = plan_stride(dot_length);
    if (stride.bank_aligned())
        fail(ErrorKind::Mapping, "bank_aligned_stride",
             "stride of " + std::to_string(stride.arms_per_stride) + " arms fits one bank");
    MultiBankPlan m;
    m.banks_per_stride = (stride.arms_per_stride + kArmsPerBank - 1) / kArmsPerBank;
    m.strides_per_load = geometry.n_banks() / m.banks_per_stride;
    m.partial_cycles = (m.banks_per_stride + geometry.n_banks() - 1) / geometry.n_banks();
    return m;
}

enum class Packing { ChannelAligned, Dense };

// What the scheduler needs to know about a layer.
struct LayerShape {
    std::size_t dot_length = 0;
    std::size_t jobs = 0;
    // Consecutive jobs sharing one kernel (output positions per channel).
    std::size_t positions = 1;
    Packing packing = Packing::Dense;
    // One kernel for every job (compressive acquisition).
    bool shared_kernel = false;

    std::size_t kernel_id(std::size_t job) const { return shared_kernel ? 0 : job / positions; }
};

// Jobs are numbered by output element in CHW order.
inline LayerShape layer_shape(const netir::LayerDesc& layer, const netir::Dims& in,
                              std::size_t index = 0) {
    const auto out = netir::layer_output_dims(layer, in, index);
    LayerShape s;
    s.dot_length = layer.dot_length();
    s.jobs = out.size();
    if (layer.is_conv()) {
        s.positions = out.h * out.w;
        s.packing = Packing::ChannelAligned;
    } else if (layer.is_fc()) {
        s.positions = 1;
    } else if (layer.is_ca()) {
        s.positions = out.h * out.w;
        s.shared_kernel = true;
    } else {
        fail(ErrorKind::Mapping, "unsupported_layer", "activation layers are not mapped", index);
    }
    return s;
}

// A segment of one job placed on one bank slot.
struct Placement {
    std::size_t bank = 0;
    std::size_t slot = 0;
    std::size_t first_arm = 0;
    std::size_t job = 0;
    std::size_t elem_offset = 0;
    std::size_t length = 0;

    std::size_t arms() const noexcept { return (length + kMrsPerArm - 1) / kMrsPerArm; }
};

class LayerSchedule {
public:
    LayerSchedule(const LayerShape& shape, const CoreGeometry& geometry, bool allow_split = true)
        : shape_(shape), geometry_(geometry), stride_(plan_stride(shape.dot_length)) {
        if (shape.jobs == 0) fail(ErrorKind::Mapping, "empty_layer", "layer has no outputs");
        if (geometry.n_banks() == 0) fail(ErrorKind::Capacity, "empty_core", "core has no banks");
        if (shape.positions == 0) fail(ErrorKind::Mapping, "empty_layer", "zero positions per kernel");
        const std::size_t nb = geometry.n_banks();
        if (stride_.bank_aligned()) {
            strides_per_bank_ = mapper::strides_per_bank(stride_);
            banks_per_stride_ = 1;
            summation_ = stride_.summation == StrideSummation::Bypass  ? core::SummationMode::Bypass
                         : stride_.summation == StrideSummation::Stage1 ? core::SummationMode::Stage1
                                                                        : core::SummationMode::Stage1And2;
            if (shape.packing == Packing::ChannelAligned) {
                banks_per_kernel_ = ceil_div(shape.positions, strides_per_bank_);
                total_banks_ = ceil_div(shape.jobs, shape.positions) * banks_per_kernel_;
            } else {
                total_banks_ = ceil_div(shape.jobs, strides_per_bank_);
            }
            cycles_ = ceil_div(total_banks_, nb);
            strides_per_load_ = strides_per_bank_ * nb;
        } else {
            const auto mb = plan_multibank(shape.dot_length, geometry);
            if (mb.split() && !allow_split)
                fail(ErrorKind::Capacity, "stride_exceeds_core",
                     "dot product of " + std::to_string(shape.dot_length) + " needs " +
                         std::to_string(stride_.arms_per_stride) + " arms; the core has " +
                         std::to_string(geometry.total_arms()));
            summation_ = core::SummationMode::Stage1And2;
            strides_per_bank_ = 0;
            banks_per_stride_ = mb.banks_per_stride;
            partial_cycles_ = mb.partial_cycles;
            if (mb.split()) {
                strides_per_load_ = 1;
                cycles_ = shape.jobs * partial_cycles_;
            } else {
                strides_per_load_ = mb.strides_per_load;
                cycles_ = ceil_div(shape.jobs, strides_per_load_);
            }
            total_banks_ = shape.jobs * banks_per_stride_;
        }
    }

    const LayerShape& shape() const noexcept { return shape_; }
    const StridePlan& stride() const noexcept { return stride_; }
    const CoreGeometry& geometry() const noexcept { return geometry_; }
    core::SummationMode bank_summation() const noexcept { return summation_; }
    std::size_t cycles() const noexcept { return cycles_; }
    std::size_t strides_per_bank() const noexcept { return strides_per_bank_; }
    std::size_t banks_per_stride() const noexcept { return banks_per_stride_; }
    std::size_t strides_per_load() const noexcept { return strides_per_load_; }
    std::size_t partial_cycles() const noexcept { return partial_cycles_; }
    std::size_t total_banks() const noexcept { return total_banks_; }

    // Placements of one cycle, ordered by (bank, slot).
    std::vector<Placement> placements(std::size_t cycle) const {
        if (cycle >= cycles_) fail(ErrorKind::Mapping, "cycle_range", "cycle index out of range");
        std::vector<Placement> out;
        const std::size_t nb = geometry_.n_banks();
        const std::size_t d = shape_.dot_length;
        if (stride_.bank_aligned()) {
            const std::size_t group = core::arms_per_output(summation_);
            for (std::size_t k = 0; k < nb; ++k) {
                const std::size_t g = cycle * nb + k;
                if (g >= total_banks_) break;
                for (std::size_t s = 0; s < strides_per_bank_; ++s) {
                    const auto job = aligned_job(g, s);
                    if (!job) continue;
                    out.push_back({k, s, s * group, *job, 0, d});
                }
            }
        } else if (partial_cycles_ > 1) {
            const std::size_t job = cycle / partial_cycles_;
            const std::size_t part = cycle % partial_cycles_;
            for (std::size_t k = 0; k < nb; ++k) {
                const std::size_t offset = (part * nb + k) * kMrsPerBank;
                if (offset >= d) break;
                out.push_back({k, 0, 0, job, offset, std::min(kMrsPerBank, d - offset)});
            }
        } else {
            for (std::size_t t = 0; t < strides_per_load_; ++t) {
                const std::size_t job = cycle * strides_per_load_ + t;
                if (job >= shape_.jobs) break;
                for (std::size_t b = 0; b < banks_per_stride_; ++b) {
                    const std::size_t offset = b * kMrsPerBank;
                    out.push_back({t * banks_per_stride_ + b, 0, 0, job, offset,
                                   std::min(kMrsPerBank, d - offset)});
                }
            }
        }
        return out;
    }

private:
    static std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

    std::optional<std::size_t> aligned_job(std::size_t global_bank, std::size_t slot) const {
        if (shape_.packing == Packing::ChannelAligned) {
            const std::size_t kernel = global_bank / banks_per_kernel_;
            const std::size_t pos = (global_bank % banks_per_kernel_) * strides_per_bank_ + slot;
            if (pos >= shape_.positions) return std::nullopt;
            const std::size_t job = kernel * shape_.positions + pos;
            return job < shape_.jobs ? std::optional{job} : std::nullopt;
        }
        const std::size_t job = global_bank * strides_per_bank_ + slot;
        return job < shape_.jobs ? std::optional{job} : std::nullopt;
    }

    LayerShape shape_;
    CoreGeometry geometry_;
    StridePlan stride_;
    core::SummationMode summation_ = core::SummationMode::Bypass;
    std::size_t strides_per_bank_ = 0;
    std::size_t banks_per_stride_ = 1;
    std::size_t strides_per_load_ = 0;
    std::size_t partial_cycles_ = 1;
    std::size_t banks_per_kernel_ = 1;
    std::size_t total_banks_ = 0;
    std::size_t cycles_ = 0;
};

struct MappingPlan {
    std::size_t layer_index = 0;
    std::string kind;
    int weight_bits = 4;
    StridePlan stride;
    std::size_t total_strides = 0;
    std::size_t strides_per_bank = 0;  // 0 in the multi-bank regime
    std::size_t banks_per_stride = 1;
    std::size_t strides_per_load = 0;
    std::size_t partial_cycles = 1;
    std::size_t bank_loads = 0;
    std::size_t cycles = 0;
    std::size_t mr_writes = 0;
    // Cycles after the first that reprogram at least one ring.
    std::size_t reprogram_events = 0;
    std::size_t multiplies = 0;
    std::size_t bpd_reads = 0;
    std::size_t readouts = 0;
    // Input pixels digitized by the comparator readout (first layer only).
    std::size_t crc_pixels = 0;
    double utilization = 0.0;
    double active_mr_fraction = 0.0;
};

// Counts every event of a layer by walking its schedule. Each slot remembers
// which (kernel, segment) it holds; rings are written only when that changes.
inline MappingPlan plan_schedule(const LayerSchedule& sched) {
    MappingPlan p;
    const auto& shape = sched.shape();
    const auto& geo = sched.geometry();
    p.stride = sched.stride();
    p.total_strides = shape.jobs;
    p.strides_per_bank = sched.strides_per_bank();
    p.banks_per_stride = sched.banks_per_stride();
    p.strides_per_load = sched.strides_per_load();
    p.partial_cycles = sched.partial_cycles();
    p.cycles = sched.cycles();
    p.bank_loads = p.cycles;

    std::vector<std::pair<std::int64_t, std::size_t>> held(geo.n_banks() * kArmsPerBank, {-1, 0});
    for (std::size_t c = 0; c < p.cycles; ++c) {
        bool wrote = false;
        for (const auto& pl : sched.placements(c)) {
            auto& slot = held[pl.bank * kArmsPerBank + pl.slot];
            const std::pair<std::int64_t, std::size_t> key{
                static_cast<std::int64_t>(shape.kernel_id(pl.job)), pl.elem_offset};
            if (slot != key) {
                slot = key;
                p.mr_writes += pl.length;
                wrote = true;
            }
            p.multiplies += pl.length;
            p.bpd_reads += pl.arms();
            ++p.readouts;
        }
        if (wrote && c > 0) ++p.reprogram_events;
    }

    const double total_mrs = static_cast<double>(geo.total_mrs());
    if (p.stride.bank_aligned()) {
        p.utilization = static_cast<double>(p.strides_per_bank * shape.dot_length * geo.n_banks()) / total_mrs;
    } else if (p.partial_cycles > 1) {
        p.utilization = std::min(1.0, static_cast<double>(shape.dot_length) / total_mrs);
    } else {
        p.utilization = static_cast<double>(p.strides_per_load * shape.dot_length) / total_mrs;
    }
    p.active_mr_fraction = static_cast<double>(p.multiplies) / (static_cast<double>(p.cycles) * total_mrs);
    return p;
}

inline MappingPlan plan_layer(const netir::LayerDesc& layer, const netir::Dims& in,
                              const CoreGeometry& geometry = {}, bool allow_split = true,
                              std::size_t index = 0) {
    if (!layer.is_linear())
        fail(ErrorKind::Mapping, "unsupported_layer", "activation layers are not mapped", index);
    try {
        const LayerSchedule sched(layer_shape(layer, in, index), geometry, allow_split);
        MappingPlan p = plan_schedule(sched);
        p.layer_index = index;
        p.kind = layer.kind_name();
        p.weight_bits = layer.weight_bits;
        return p;
    } catch (const Error& e) {
        throw e.at_layer(index);
    }
}

// Plans of every conv/fc/ca layer, in order. The first mapped layer also
// accounts for the comparator readout of the input frame.
inline std::vector<MappingPlan> plan_model(const netir::ModelDesc& model, const CoreGeometry& geometry = {},
                                           bool allow_split = true) {
    const auto dims = netir::validate_chain(model, model.input);
    std::vector<MappingPlan> plans;
    netir::Dims in = model.input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        if (l.is_linear()) {
            plans.push_back(plan_layer(l, in, geometry, allow_split, i));
            if (plans.size() == 1) plans.back().crc_pixels = model.input.size();
        }
        in = dims[i];
    }
    return plans;
}

}  // namespace lightator::mapper
