#pragma once

// Event-energy power model. Every mapped layer is charged for the events of
// its schedule:
//
//   DAC   ring writes * active DAC slices * e_dac_slice
//   TUN   ring writes * e_tune_per_mr
//   DMVA  modulated symbols * e_vcsel + digitized input pixels * e_crc
//   BPD   arm reads * e_bpd
//   ADC   bank-output conversions * e_adc
//   MISC  static power over the layer's time
//
// A layer lasts (cycles + stall cycles) / core_clock_hz; its power is its
// energy over that time. The network draws frame energy over frame time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lightator/error.hpp"
#include "lightator/mapper.hpp"
#include "lightator/quant.hpp"

namespace lightator::power {

struct EnergyConfig {
    double e_dac_slice_j = 1.0e-12;
    double e_tune_per_mr_j = 1.0e-12;
    double e_vcsel_per_symbol_j = 1.0e-14;
    double e_crc_per_pixel_j = 1.0e-14;
    double e_bpd_per_read_j = 1.0e-14;
    double e_adc_per_conv_j = 1.0e-13;
    double p_misc_static_w = 1.0e-3;
    double core_clock_hz = 1.0e9;
    // Core cycles lost per weight-image swap.
    std::size_t stall_cycles_per_swap = 1;

    void validate() const {
        const double e[] = {e_dac_slice_j,     e_tune_per_mr_j,  e_vcsel_per_symbol_j, e_crc_per_pixel_j,
                            e_bpd_per_read_j,  e_adc_per_conv_j, p_misc_static_w};
        for (double v : e)
            if (!(v >= 0.0) || !std::isfinite(v))
                fail(ErrorKind::Validation, "energy_config", "energies must be finite and non-negative");
        if (!(core_clock_hz > 0.0) || !std::isfinite(core_clock_hz))
            fail(ErrorKind::Validation, "energy_config", "core_clock_hz must be positive");
    }
};

inline int dac_slices(int weight_bits) {
    quant::check_weight_bits(weight_bits);
    return (1 << weight_bits) - 1;
}

enum Component : std::size_t { ADC, DAC, DMVA, TUN, BPD, MISC, kComponents };

inline constexpr std::array<const char*, kComponents> kComponentNames{"ADC", "DAC", "DMVA", "TUN", "BPD", "MISC"};

using Breakdown = std::array<double, kComponents>;

inline double sum(const Breakdown& b) {
    double s = 0.0;
    for (double v : b) s += v;
    return s;
}

struct LayerPower {
    std::size_t layer_index = 0;
    std::string kind;
    int weight_bits = 4;
    std::size_t cycles = 0;
    std::size_t stall_cycles = 0;
    Breakdown energy_j{};
    Breakdown watts{};

    std::size_t time_cycles() const noexcept { return cycles + stall_cycles; }
    double total_w() const { return sum(watts); }
    double total_j() const { return sum(energy_j); }
    double share(Component c) const {
        const double t = total_w();
        return t > 0.0 ? watts[c] / t : 0.0;
    }
};

inline LayerPower layer_power(const mapper::MappingPlan& plan, const EnergyConfig& cfg) {
    cfg.validate();
    LayerPower lp;
    lp.layer_index = plan.layer_index;
    lp.kind = plan.kind;
    lp.weight_bits = plan.weight_bits;
    lp.cycles = plan.cycles;
    lp.stall_cycles = plan.reprogram_events * cfg.stall_cycles_per_swap;
    const double writes = static_cast<double>(plan.mr_writes);
    const double seconds = static_cast<double>(lp.time_cycles()) / cfg.core_clock_hz;
    auto& e = lp.energy_j;
    e[DAC] = writes * dac_slices(plan.weight_bits) * cfg.e_dac_slice_j;
    e[TUN] = writes * cfg.e_tune_per_mr_j;
    e[DMVA] = static_cast<double>(plan.multiplies) * cfg.e_vcsel_per_symbol_j +
              static_cast<double>(plan.crc_pixels) * cfg.e_crc_per_pixel_j;
    e[BPD] = static_cast<double>(plan.bpd_reads) * cfg.e_bpd_per_read_j;
    e[ADC] = static_cast<double>(plan.readouts) * cfg.e_adc_per_conv_j;
    e[MISC] = cfg.p_misc_static_w * seconds;
    for (std::size_t c = 0; c < kComponents; ++c) lp.watts[c] = seconds > 0.0 ? e[c] / seconds : 0.0;
    return lp;
}

struct PowerReport {
    std::vector<LayerPower> layers;
    std::size_t frame_cycles = 0;
    double frame_energy_j = 0.0;
    double network_w = 0.0;
    double fps = 0.0;
    double kfps_per_w = 0.0;
    double max_power_w = 0.0;
    std::size_t max_power_layer = 0;
};

inline PowerReport network_report(std::span<const mapper::MappingPlan> plans, const EnergyConfig& cfg) {
    if (plans.empty()) fail(ErrorKind::Validation, "empty_model", "no mapped layers to report");
    PowerReport r;
    for (const auto& p : plans) {
        r.layers.push_back(layer_power(p, cfg));
        const auto& lp = r.layers.back();
        r.frame_cycles += lp.time_cycles();
        r.frame_energy_j += lp.total_j();
        if (lp.total_w() > r.max_power_w) {
            r.max_power_w = lp.total_w();
            r.max_power_layer = lp.layer_index;
        }
    }
    const double frame_s = static_cast<double>(r.frame_cycles) / cfg.core_clock_hz;
    r.network_w = r.frame_energy_j / frame_s;
    r.fps = 1.0 / frame_s;
    r.kfps_per_w = r.network_w > 0.0 ? r.fps / 1000.0 / r.network_w : 0.0;
    return r;
}

inline nlohmann::ordered_json to_json(const PowerReport& r) {
    nlohmann::ordered_json j;
    auto layers = nlohmann::ordered_json::array();
    for (const auto& lp : r.layers) {
        nlohmann::ordered_json l;
        l["layer"] = lp.layer_index;
        l["kind"] = lp.kind;
        l["weight_bits"] = lp.weight_bits;
        l["cycles"] = lp.cycles;
        l["stall_cycles"] = lp.stall_cycles;
        nlohmann::ordered_json w;
        for (std::size_t c = 0; c < kComponents; ++c) w[kComponentNames[c]] = lp.watts[c];
        l["watts"] = std::move(w);
        l["total_w"] = lp.total_w();
        l["energy_j"] = lp.total_j();
        l["dac_share"] = lp.share(DAC);
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    j["frame_cycles"] = r.frame_cycles;
    j["frame_energy_j"] = r.frame_energy_j;
    j["network_w"] = r.network_w;
    j["max_power_w"] = r.max_power_w;
    j["max_power_layer"] = r.max_power_layer;
    j["fps"] = r.fps;
    j["kfps_per_w"] = r.kfps_per_w;
    return j;
}

// One row per layer per component: layer,kind,component,watts
inline std::string to_csv(const PowerReport& r) {
    std::string out = "layer,kind,component,watts\n";
    char buf[64];
    for (const auto& lp : r.layers)
        for (std::size_t c = 0; c < kComponents; ++c) {
            std::snprintf(buf, sizeof buf, "%.9g", lp.watts[c]);
            out += std::to_string(lp.layer_index) + "," + lp.kind + "," + kComponentNames[c] + "," + buf + "\n";
        }
    return out;
}

// P(b) = alpha * (2^b - 1) + beta
struct PowerFit {
    double alpha = 0.0;
    double beta = 0.0;
    double predict(int bits) const { return alpha * dac_slices(bits) + beta; }
};

struct PowerPoint {
    int weight_bits = 4;
    double watts = 0.0;
};

// Least squares in x = 2^b - 1 with alpha, beta >= 0.
inline PowerFit calibrate(std::span<const PowerPoint> points) {
    if (points.size() < 2) fail(ErrorKind::Validation, "degenerate_points", "need at least two points");
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : points) {
        const double x = dac_slices(p.weight_bits);
        n += 1;
        sx += x;
        sy += p.watts;
        sxx += x * x;
        sxy += x * p.watts;
    }
    const double det = n * sxx - sx * sx;
    if (det <= 0.0) fail(ErrorKind::Validation, "degenerate_points", "points need at least two distinct bit widths");
    PowerFit f;
    f.alpha = (n * sxy - sx * sy) / det;
    f.beta = (sy - f.alpha * sx) / n;
    if (f.alpha < 0.0) {
        f.alpha = 0.0;
        f.beta = std::max(0.0, sy / n);
    } else if (f.beta < 0.0) {
        f.beta = 0.0;
        f.alpha = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
    }
    return f;
}

// Targets for fitting an EnergyConfig to a reference network.
struct CalibrationTargets {
    double max_power_4b_w = 5.28;
    double max_power_3b_w = 2.71;
    double kfps_per_w_4b = 61.61;
    // DAC share of an all-write layer at 3 bits; fixes beta = 7 alpha (1 - s) / s.
    double dac_share_3b = 0.88;
    // Fractions of beta carried by the per-cycle components at the peak layer;
    // the remainder of beta goes to tuning.
    double beta_dmva = 1e-4;
    double beta_bpd = 1e-4;
    double beta_adc = 1e-4;
    double beta_misc = 1e-4;
    std::size_t stall_cycles_per_swap = 1;
};

struct CalibrationResult {
    EnergyConfig config;
    PowerFit fit;
    // Model layer index of the layer the fit was anchored on.
    std::size_t peak_layer = 0;
};

// Fits energies so that the reference network's peak layer draws
// alpha (2^b - 1) + beta, with alpha minimizing the relative error against
// both target powers under the share constraint, and the clock set so that
// the 4-bit network reaches the KFPS/W target. plans must be at 4 bits.
inline CalibrationResult fit_energy_config(std::span<const mapper::MappingPlan> plans,
                                           const CalibrationTargets& t = {}) {
    if (plans.empty()) fail(ErrorKind::Validation, "empty_model", "no mapped layers to calibrate");
    if (!(t.dac_share_3b > 0.0 && t.dac_share_3b < 1.0))
        fail(ErrorKind::Domain, "calibration_target", "DAC share target must lie in (0, 1)");
    const double k = dac_slices(3) * (1.0 - t.dac_share_3b) / t.dac_share_3b;
    const double x4 = (dac_slices(4) + k) / t.max_power_4b_w;
    const double x3 = (dac_slices(3) + k) / t.max_power_3b_w;
    CalibrationResult out;
    out.fit.alpha = (x4 + x3) / (x4 * x4 + x3 * x3);
    out.fit.beta = k * out.fit.alpha;
    const double tun = 1.0 - t.beta_dmva - t.beta_bpd - t.beta_adc - t.beta_misc;
    if (!(tun > 0.0)) fail(ErrorKind::Domain, "calibration_target", "per-cycle fractions leave no tuning share");

    auto time_of = [&](const mapper::MappingPlan& p) {
        return static_cast<double>(p.cycles + p.reprogram_events * t.stall_cycles_per_swap);
    };
    // Start from the layer with the highest write rate.
    std::size_t peak = 0;
    for (std::size_t i = 1; i < plans.size(); ++i)
        if (plans[i].mr_writes / time_of(plans[i]) > plans[peak].mr_writes / time_of(plans[peak])) peak = i;

    for (int iter = 0; iter < 16; ++iter) {
        const auto& p = plans[peak];
        if (p.mr_writes == 0) fail(ErrorKind::Domain, "calibration_target", "peak layer writes no rings");
        const double tp = time_of(p);
        const double a = out.fit.alpha, b = out.fit.beta;
        // Energies times the clock (joules * Hz) at the peak layer.
        EnergyConfig e;
        e.stall_cycles_per_swap = t.stall_cycles_per_swap;
        e.e_dac_slice_j = a * tp / static_cast<double>(p.mr_writes);
        e.e_tune_per_mr_j = tun * b * tp / static_cast<double>(p.mr_writes);
        const double symbols = static_cast<double>(p.multiplies + p.crc_pixels);
        e.e_vcsel_per_symbol_j = symbols > 0 ? t.beta_dmva * b * tp / symbols : 0.0;
        e.e_crc_per_pixel_j = e.e_vcsel_per_symbol_j;
        e.e_bpd_per_read_j = p.bpd_reads > 0 ? t.beta_bpd * b * tp / static_cast<double>(p.bpd_reads) : 0.0;
        e.e_adc_per_conv_j = p.readouts > 0 ? t.beta_adc * b * tp / static_cast<double>(p.readouts) : 0.0;
        e.p_misc_static_w = t.beta_misc * b;
        e.core_clock_hz = 1.0;
        // KFPS/W = clock / (1000 * frame energy * clock), so the clock follows.
        const auto unit = network_report(plans, e);
        const double clock = 1000.0 * t.kfps_per_w_4b * unit.frame_energy_j;
        e.core_clock_hz = clock;
        for (double* v : {&e.e_dac_slice_j, &e.e_tune_per_mr_j, &e.e_vcsel_per_symbol_j, &e.e_crc_per_pixel_j,
                          &e.e_bpd_per_read_j, &e.e_adc_per_conv_j})
            *v /= clock;
        out.config = e;
        out.peak_layer = p.layer_index;
        const auto check = network_report(plans, e);
        std::size_t actual = peak;
        for (std::size_t i = 0; i < check.layers.size(); ++i)
            if (check.layers[i].total_w() > check.layers[actual].total_w() * (1.0 + 1e-12)) actual = i;
        if (actual == peak) return out;
        peak = actual;
    }
    fail(ErrorKind::Domain, "calibration_diverged", "peak layer did not settle");
}

}  // namespace lightator::power
