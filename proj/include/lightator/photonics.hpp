#pragma once

// Device models for the optical path: microring through-port response,
// comparator-based pixel readout, VCSEL intensity coding and balanced
// photodetection. Everything here is a pure function of its arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>

#include "lightator/error.hpp"

namespace lightator::photonics {

inline constexpr std::size_t kChannelsPerArm = 9;
inline constexpr int kCrcComparators = 15;
inline constexpr int kMaxCode = 15;

// Physical resonator parameters. Construction validates the invariants, so
// every MRDeviceParams in circulation is usable without further checks.
class MRDeviceParams {
public:
    MRDeviceParams() = default;
    MRDeviceParams(double n_eff, double circumference_um, int mode_order, double fwhm_nm,
                   double t_min)
        : n_eff_(n_eff), circumference_um_(circumference_um), mode_order_(mode_order),
          fwhm_nm_(fwhm_nm), t_min_(t_min) {
        if (!(n_eff > 0.0)) fail(ErrorKind::Domain, "mr_params", "n_eff must be positive");
        if (!(circumference_um > 0.0))
            fail(ErrorKind::Domain, "mr_params", "circumference must be positive");
        if (mode_order < 1) fail(ErrorKind::Domain, "mr_params", "mode order must be >= 1");
        if (!(fwhm_nm > 0.0)) fail(ErrorKind::Domain, "mr_params", "FWHM must be positive");
        if (!(t_min >= 0.0 && t_min < 1.0))
            fail(ErrorKind::Domain, "mr_params", "t_min must lie in [0, 1)");
    }

    double n_eff() const noexcept { return n_eff_; }
    double circumference_um() const noexcept { return circumference_um_; }
    int mode_order() const noexcept { return mode_order_; }
    double fwhm_nm() const noexcept { return fwhm_nm_; }
    double t_min() const noexcept { return t_min_; }
    // Dip depth A = 1 - t_min.
    double depth() const noexcept { return 1.0 - t_min_; }

private:
    double n_eff_ = 2.4;
    double circumference_um_ = 6.45;
    int mode_order_ = 10;
    double fwhm_nm_ = 0.2;
    double t_min_ = 0.05;
};

inline double resonant_wavelength_nm(const MRDeviceParams& p) {
    return p.n_eff() * p.circumference_um() * 1000.0 / static_cast<double>(p.mode_order());
}

// Lorentzian all-pass dip: T = 1 - A / (1 + (2 d / FWHM)^2).
inline double through_transmission(double detuning_nm, const MRDeviceParams& p) {
    const double x = 2.0 * detuning_nm / p.fwhm_nm();
    return 1.0 - p.depth() / (1.0 + x * x);
}

// Non-negative detuning that realizes transmission t_target.
inline double detuning_for_transmission(double t_target, const MRDeviceParams& p) {
    if (!(t_target >= p.t_min()) || !(t_target < 1.0))
        fail(ErrorKind::Domain, "transmission_out_of_range",
             "target transmission " + std::to_string(t_target) + " not realizable in [" +
                 std::to_string(p.t_min()) + ", 1)");
    const double ratio = p.depth() / (1.0 - t_target) - 1.0;
    return 0.5 * p.fwhm_nm() * std::sqrt(std::max(ratio, 0.0));
}

// Comparator-based reading circuit: 15 references uniformly spaced strictly
// inside (v_lo, v_hi); the code is the number of references below v_pd.
inline int crc_quantize(double v_pd, double v_lo, double v_hi) {
    if (!(v_lo < v_hi)) fail(ErrorKind::Domain, "crc_range", "CRC range requires v_lo < v_hi");
    const double step = (v_hi - v_lo) / static_cast<double>(kCrcComparators + 1);
    int code = 0;
    for (int k = 1; k <= kCrcComparators; ++k) {
        if (v_lo + step * k < v_pd) ++code;
    }
    return code;
}

struct OpticalSymbol {
    std::size_t channel = 0;
    int level = 0;
    double intensity = 0.0;
};

// Driver with 15 unit current slices plus a bias slice: 16 linear levels.
inline OpticalSymbol vcsel_encode(int code, std::size_t channel = 0) {
    if (code < 0 || code > kMaxCode)
        fail(ErrorKind::Domain, "vcsel_code", "VCSEL code " + std::to_string(code) + " outside 0..15");
    return {channel, code, static_cast<double>(code) / static_cast<double>(kMaxCode)};
}

// Unit-responsivity balanced detector.
inline double bpd_detect(double p_plus, double p_minus) {
    if (p_plus < 0.0 || p_minus < 0.0)
        fail(ErrorKind::Domain, "negative_power", "optical power must be non-negative");
    return p_plus - p_minus;
}

// One ring of an arm: inactive, or programmed with a signed weight level.
struct MRAssignment {
    std::uint8_t channel = 0;
    std::optional<int> level;

    static MRAssignment inactive(std::size_t ch) { return {static_cast<std::uint8_t>(ch), std::nullopt}; }
    static MRAssignment active(std::size_t ch, int lvl) { return {static_cast<std::uint8_t>(ch), lvl}; }
    bool is_active() const noexcept { return level.has_value(); }
};

// How signed weight levels are imprinted on the two rails of an arm.
// A weight fraction f in [0, 1] targets T = t_min + f (t_max - t_min); the
// balanced detector cancels the common t_min floor.
struct WeightEncoding {
    MRDeviceParams device;
    double t_max = 0.95;
    // Snap targets onto 16 uniformly spaced transmissions (finite tuning DAC).
    bool quantize_transmission = false;

    double span() const noexcept { return t_max - device.t_min(); }
};

struct RailPair {
    double plus = 0.0;
    double minus = 0.0;
};

inline double realize_fraction(double fraction, const WeightEncoding& enc) {
    double target = enc.device.t_min() + fraction * enc.span();
    if (enc.quantize_transmission) {
        const double step = enc.span() / static_cast<double>(kMaxCode);
        target = enc.device.t_min() + std::round((target - enc.device.t_min()) / step) * step;
    }
    return through_transmission(detuning_for_transmission(target, enc.device), enc.device);
}

// Through-port transmissions for weight level w with |w| <= max_level.
inline RailPair weight_transmissions(int level, int max_level, const WeightEncoding& enc) {
    if (max_level <= 0 || std::abs(level) > max_level)
        fail(ErrorKind::Domain, "weight_level", "weight level " + std::to_string(level) +
                                                    " outside +-" + std::to_string(max_level));
    const double f = static_cast<double>(std::abs(level)) / static_cast<double>(max_level);
    const double on = realize_fraction(f, enc);
    const double off = realize_fraction(0.0, enc);
    return level >= 0 ? RailPair{on, off} : RailPair{off, on};
}

}  // namespace lightator::photonics
