#pragma once

// The optical core: arms of 9 rings, banks of 6 arms with a two-stage
// summation section, and a grid of banks executed once per core cycle.

#include <algorithm>
#include <array>
#include <cstdint>
#include <future>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "lightator/error.hpp"
#include "lightator/photonics.hpp"
#include "lightator/quant.hpp"

namespace lightator::core {

using photonics::MRAssignment;

inline constexpr std::size_t kArmsPerBank = 6;
inline constexpr std::size_t kMrsPerArm = photonics::kChannelsPerArm;
inline constexpr std::size_t kMrsPerBank = kArmsPerBank * kMrsPerArm;

struct CoreGeometry {
    std::size_t bank_rows = 12;
    std::size_t bank_cols = 8;

    std::size_t n_banks() const noexcept { return bank_rows * bank_cols; }
    std::size_t total_mrs() const noexcept { return n_banks() * kMrsPerBank; }
    std::size_t total_arms() const noexcept { return n_banks() * kArmsPerBank; }
};

enum class SummationMode { Bypass, Stage1, Stage1And2 };

inline const char* to_string(SummationMode m) {
    switch (m) {
    case SummationMode::Bypass: return "bypass";
    case SummationMode::Stage1: return "stage1";
    case SummationMode::Stage1And2: return "stage1and2";
    }
    return "?";
}

inline constexpr std::size_t outputs_per_bank(SummationMode m) {
    return m == SummationMode::Bypass ? 6 : m == SummationMode::Stage1 ? 2 : 1;
}

// Arms feeding each output of a bank: 1, 3 or 6.
inline constexpr std::size_t arms_per_output(SummationMode m) {
    return kArmsPerBank / outputs_per_bank(m);
}

struct ArmLoad {
    std::array<MRAssignment, kMrsPerArm> weights{};
    std::array<std::uint8_t, kMrsPerArm> acts{};

    ArmLoad() {
        for (std::size_t i = 0; i < kMrsPerArm; ++i) weights[i] = MRAssignment::inactive(i);
    }
};

struct BankLoad {
    std::array<ArmLoad, kArmsPerBank> arms{};
    SummationMode summation = SummationMode::Bypass;
    // Largest weight level magnitude of the layer; device mode normalizes by it.
    int weight_max_level = 7;
};

enum class ExecMode { Ideal, Device };

inline const char* to_string(ExecMode m) { return m == ExecMode::Ideal ? "ideal" : "device"; }

struct DeviceModel {
    photonics::WeightEncoding encoding;
    // Std-dev of zero-mean Gaussian noise on each arm's BPD output, in units
    // of normalized optical power.
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
};

struct ExecContext {
    ExecMode mode = ExecMode::Ideal;
    DeviceModel device;
    // Mixed into the per-arm noise seed; callers vary it per layer and cycle.
    std::uint64_t cycle_seed = 0;
    unsigned threads = 1;
};

struct StrideResult {
    // Digital accumulator: exact in ideal mode, the rounded readout in device mode.
    std::int64_t level = 0;
    double analog = 0.0;
    std::size_t bank = 0;
    std::size_t slot = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace detail {

inline void check_arm(std::span<const std::uint8_t, kMrsPerArm> acts,
                      std::span<const MRAssignment, kMrsPerArm> weights) {
    for (std::size_t i = 0; i < kMrsPerArm; ++i) {
        if (acts[i] > quant::kActMax)
            fail(ErrorKind::Mapping, "activation_range",
                 "activation level " + std::to_string(acts[i]) + " exceeds 15");
        if (!weights[i].is_active() && acts[i] != 0)
            fail(ErrorKind::Mapping, "inactive_slot_fed",
                 "activation fed to inactive ring on channel " + std::to_string(i));
    }
}

}  // namespace detail

inline std::int64_t arm_mac_ideal(std::span<const std::uint8_t, kMrsPerArm> acts,
                                  std::span<const MRAssignment, kMrsPerArm> weights) {
    detail::check_arm(acts, weights);
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < kMrsPerArm; ++i) {
        if (weights[i].is_active()) acc += static_cast<std::int64_t>(acts[i]) * *weights[i].level;
    }
    return acc;
}

// Optical reconstruction of one arm, returned in the integer level domain:
// each channel's VCSEL intensity passes a ring on each rail, the BPD
// subtracts the rails, and the readout rescales by 15 * max_level / span.
inline double arm_mac_device(std::span<const std::uint8_t, kMrsPerArm> acts,
                             std::span<const MRAssignment, kMrsPerArm> weights, int max_level,
                             const DeviceModel& device, std::uint64_t noise_seed) {
    detail::check_arm(acts, weights);
    double plus = 0.0;
    double minus = 0.0;
    for (std::size_t i = 0; i < kMrsPerArm; ++i) {
        if (!weights[i].is_active()) continue;
        const double intensity = photonics::vcsel_encode(acts[i], i).intensity;
        const auto rails = photonics::weight_transmissions(*weights[i].level, max_level, device.encoding);
        plus += intensity * rails.plus;
        minus += intensity * rails.minus;
    }
    double diff = photonics::bpd_detect(plus, minus);
    if (device.noise_sigma > 0.0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> noise(0.0, device.noise_sigma);
        diff += noise(rng);
    }
    return diff * quant::kActMax * max_level / device.encoding.span();
}

// Bypass -> identity, Stage1 -> two sums over arms {0,1,2} and {3,4,5},
// Stage1And2 -> one sum. Summation order is fixed.
template <typename T>
std::vector<T> summation_tree(std::span<const T, kArmsPerBank> arms, SummationMode mode) {
    const std::size_t group = arms_per_output(mode);
    std::vector<T> out(outputs_per_bank(mode), T{});
    for (std::size_t a = 0; a < kArmsPerBank; ++a) out[a / group] += arms[a];
    return out;
}

inline std::size_t active_mrs(const BankLoad& load) {
    std::size_t n = 0;
    for (const auto& arm : load.arms)
        n += static_cast<std::size_t>(std::count_if(arm.weights.begin(), arm.weights.end(),
                                                    [](const MRAssignment& m) { return m.is_active(); }));
    return n;
}

inline std::vector<StrideResult> execute_bank(const BankLoad& load, const ExecContext& ctx,
                                              std::size_t bank_index = 0) {
    std::vector<StrideResult> out;
    if (ctx.mode == ExecMode::Ideal) {
        std::array<std::int64_t, kArmsPerBank> arm_out{};
        for (std::size_t a = 0; a < kArmsPerBank; ++a)
            arm_out[a] = arm_mac_ideal(load.arms[a].acts, load.arms[a].weights);
        const auto sums = summation_tree<std::int64_t>(arm_out, load.summation);
        for (std::size_t s = 0; s < sums.size(); ++s)
            out.push_back({sums[s], static_cast<double>(sums[s]), bank_index, s});
    } else {
        std::array<double, kArmsPerBank> arm_out{};
        for (std::size_t a = 0; a < kArmsPerBank; ++a) {
            const std::uint64_t seed =
                splitmix64(ctx.device.seed ^ splitmix64(ctx.cycle_seed ^ splitmix64(bank_index * kArmsPerBank + a)));
            arm_out[a] = arm_mac_device(load.arms[a].acts, load.arms[a].weights,
                                        load.weight_max_level, ctx.device, seed);
        }
        const auto sums = summation_tree<double>(arm_out, load.summation);
        for (std::size_t s = 0; s < sums.size(); ++s)
            out.push_back({std::llround(sums[s]), sums[s], bank_index, s});
    }
    return out;
}

struct CycleResult {
    std::vector<StrideResult> results;  // ordered by (bank, slot)
    std::size_t multiplies = 0;
};

inline CycleResult execute_core_cycle(std::span<const BankLoad> loads, const ExecContext& ctx,
                                      const CoreGeometry& geometry = {}) {
    if (loads.size() > geometry.n_banks())
        fail(ErrorKind::Capacity, "too_many_banks",
             std::to_string(loads.size()) + " bank loads exceed " +
                 std::to_string(geometry.n_banks()) + " banks");
    std::vector<std::vector<StrideResult>> per_bank(loads.size());
    const unsigned threads = std::max(1u, std::min<unsigned>(ctx.threads, static_cast<unsigned>(loads.size())));
    if (threads <= 1) {
        for (std::size_t b = 0; b < loads.size(); ++b) per_bank[b] = execute_bank(loads[b], ctx, b);
    } else {
        std::vector<std::future<void>> jobs;
        const std::size_t chunk = (loads.size() + threads - 1) / threads;
        for (std::size_t start = 0; start < loads.size(); start += chunk) {
            const std::size_t stop = std::min(loads.size(), start + chunk);
            jobs.push_back(std::async(std::launch::async, [&, start, stop] {
                for (std::size_t b = start; b < stop; ++b) per_bank[b] = execute_bank(loads[b], ctx, b);
            }));
        }
        for (auto& j : jobs) j.get();
    }
    CycleResult out;
    for (std::size_t b = 0; b < loads.size(); ++b) {
        out.multiplies += active_mrs(loads[b]);
        out.results.insert(out.results.end(), per_bank[b].begin(), per_bank[b].end());
    }
    return out;
}

}  // namespace lightator::core
