#pragma once

// Fixed-point machinery shared by the simulator and the reference oracle.
//
// Weights are symmetric signed levels in [-(2^(b-1)-1), 2^(b-1)-1] (no most
// negative code), activations are unsigned 4-bit codes in [0, 15]. A real
// value is always level * scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lightator/error.hpp"

namespace lightator::quant {

inline constexpr int kActBits = 4;
inline constexpr int kActMax = 15;

enum class Signedness { Signed, Unsigned };

inline void check_weight_bits(int bits) {
    if (bits < 2 || bits > 4)
        fail(ErrorKind::Validation, "unsupported_precision",
             "weight precision " + std::to_string(bits) + " not in {2,3,4}");
}

inline int weight_level_max(int bits) {
    check_weight_bits(bits);
    return (1 << (bits - 1)) - 1;
}

// Round half away from zero. Quotients that land within 1e-9 of a half are
// treated as exact halves so that, e.g., 0.35 / 0.1 rounds to 4.
inline std::int64_t round_half_away(double x) {
    const double mag = std::abs(x);
    const double whole = std::floor(mag);
    const double frac = mag - whole;
    const double r = frac >= 0.5 - 1e-9 ? whole + 1.0 : whole;
    return static_cast<std::int64_t>(x < 0.0 ? -r : r);
}

struct QuantSpec {
    int weight_bits = 4;
    int act_bits = kActBits;
    double weight_scale = 1.0;
    double act_scale = 1.0;
};

inline QuantSpec make_weight_qspec(std::span<const double> weights, int bits) {
    check_weight_bits(bits);
    if (weights.empty()) fail(ErrorKind::Validation, "empty_weights", "no weights to quantize");
    double max_abs = 0.0;
    for (double w : weights) max_abs = std::max(max_abs, std::abs(w));
    QuantSpec spec;
    spec.weight_bits = bits;
    spec.weight_scale = max_abs > 0.0 ? max_abs / weight_level_max(bits) : 1.0;
    return spec;
}

// Quantized tensor. Levels are checked against the declared range on
// construction and the object is immutable afterwards.
class QTensor {
public:
    QTensor() = default;
    QTensor(std::vector<std::size_t> dims, std::vector<std::int32_t> levels, double scale,
            Signedness signedness, int bits)
        : dims_(std::move(dims)), levels_(std::move(levels)), scale_(scale),
          signedness_(signedness), bits_(bits) {
        const std::size_t n = std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                                              std::multiplies<>());
        if (n != levels_.size())
            fail(ErrorKind::Validation, "qtensor_shape", "level count does not match dims");
        if (!(scale_ > 0.0)) fail(ErrorKind::Validation, "qtensor_scale", "scale must be positive");
        const auto [lo, hi] = range();
        for (auto l : levels_) {
            if (l < lo || l > hi)
                fail(ErrorKind::Validation, "qtensor_range",
                     "level " + std::to_string(l) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
        }
    }

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::span<const std::int32_t> levels() const noexcept { return levels_; }
    double scale() const noexcept { return scale_; }
    Signedness signedness() const noexcept { return signedness_; }
    int bits() const noexcept { return bits_; }
    std::size_t size() const noexcept { return levels_.size(); }
    double dequantize(std::size_t i) const { return levels_.at(i) * scale_; }

    std::pair<std::int32_t, std::int32_t> range() const {
        if (signedness_ == Signedness::Unsigned) return {0, (1 << bits_) - 1};
        const std::int32_t m = (1 << (bits_ - 1)) - 1;
        return {-m, m};
    }

    bool operator==(const QTensor&) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::int32_t> levels_;
    double scale_ = 1.0;
    Signedness signedness_ = Signedness::Unsigned;
    int bits_ = kActBits;
};

inline std::int32_t quantize_value(double value, double scale, Signedness s, int bits) {
    const std::int64_t hi = s == Signedness::Signed ? (1 << (bits - 1)) - 1 : (1 << bits) - 1;
    const std::int64_t lo = s == Signedness::Signed ? -hi : 0;
    return static_cast<std::int32_t>(std::clamp(round_half_away(value / scale), lo, hi));
}

inline QTensor quantize(std::span<const double> values, std::vector<std::size_t> dims,
                        double scale, Signedness s, int bits) {
    std::vector<std::int32_t> levels(values.size());
    std::transform(values.begin(), values.end(), levels.begin(),
                   [&](double v) { return quantize_value(v, scale, s, bits); });
    return QTensor(std::move(dims), std::move(levels), scale, s, bits);
}

inline QTensor quantize_weights(std::span<const double> values, std::vector<std::size_t> dims,
                                const QuantSpec& spec) {
    return quantize(values, std::move(dims), spec.weight_scale, Signedness::Signed,
                    spec.weight_bits);
}

enum class ActivationKind { Sign, ReLU, Tanh };

inline const char* to_string(ActivationKind k) {
    switch (k) {
    case ActivationKind::Sign: return "sign";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Tanh: return "tanh";
    }
    return "?";
}

inline ActivationKind parse_activation(const std::string& name) {
    if (name == "sign") return ActivationKind::Sign;
    if (name == "relu") return ActivationKind::ReLU;
    if (name == "tanh") return ActivationKind::Tanh;
    fail(ErrorKind::Validation, "unknown_activation", "unknown activation '" + name + "'");
}

// Output-code scales for the fixed-range activations. A sign code of 15
// stands for 1.0; tanh codes carry tanh(x) + 1 in steps of 2/15.
inline constexpr double kSignScale = 1.0 / kActMax;
inline constexpr double kTanhScale = 2.0 / kActMax;

// 16-entry tanh table stored as the 15 pre-activation thresholds where the
// code steps up: code = #{k : x >= threshold_k}.
class TanhLut {
public:
    TanhLut() {
        for (int k = 1; k <= kActMax; ++k)
            thresholds_[k - 1] = std::atanh((2.0 * k - 1.0) / kActMax - 1.0);
    }
    int code(double x) const {
        return static_cast<int>(std::upper_bound(thresholds_.begin(), thresholds_.end(), x) -
                                thresholds_.begin());
    }
    static const TanhLut& instance() {
        static const TanhLut lut;
        return lut;
    }

private:
    std::array<double, kActMax> thresholds_{};
};

inline double preactivation(std::int64_t accum, double in_scale) {
    return static_cast<double>(accum) * in_scale;
}

// Activation on an exact MAC accumulator. in_scale = weight_scale * act_scale
// of the producing layer; out_act_scale is used by ReLU only.
inline int apply_activation(ActivationKind kind, std::int64_t accum, double in_scale,
                            double out_act_scale) {
    switch (kind) {
    case ActivationKind::Sign: return accum > 0 ? kActMax : 0;
    case ActivationKind::ReLU: {
        const double v = std::max(preactivation(accum, in_scale), 0.0);
        return quantize_value(v, out_act_scale, Signedness::Unsigned, kActBits);
    }
    case ActivationKind::Tanh: return TanhLut::instance().code(preactivation(accum, in_scale));
    }
    fail(ErrorKind::Validation, "unknown_activation", "unknown activation kind");
}

// Picks the act scale that maps the largest value to code 15 (or uses a
// frozen one) and quantizes. Values must already be non-negative.
inline QTensor requantize_featuremap(std::span<const double> values,
                                     std::vector<std::size_t> dims,
                                     std::optional<double> frozen_scale = std::nullopt) {
    if (values.empty())
        fail(ErrorKind::Validation, "empty_calibration", "calibration set is empty");
    double scale = 0.0;
    if (frozen_scale) {
        scale = *frozen_scale;
    } else {
        const double mx = *std::max_element(values.begin(), values.end());
        scale = mx > 0.0 ? mx / kActMax : 1.0;
    }
    return quantize(values, std::move(dims), scale, Signedness::Unsigned, kActBits);
}

// Accumulators of one layer -> 4-bit codes for the next layer.
inline QTensor activate_featuremap(ActivationKind kind, std::span<const std::int64_t> accum,
                                   double in_scale, std::vector<std::size_t> dims,
                                   std::optional<double> frozen_scale = std::nullopt) {
    switch (kind) {
    case ActivationKind::ReLU: {
        std::vector<double> v(accum.size());
        std::transform(accum.begin(), accum.end(), v.begin(), [&](std::int64_t a) {
            return std::max(preactivation(a, in_scale), 0.0);
        });
        return requantize_featuremap(v, std::move(dims), frozen_scale);
    }
    case ActivationKind::Sign:
    case ActivationKind::Tanh: {
        std::vector<std::int32_t> codes(accum.size());
        std::transform(accum.begin(), accum.end(), codes.begin(), [&](std::int64_t a) {
            return apply_activation(kind, a, in_scale, 1.0);
        });
        const double scale = kind == ActivationKind::Sign ? kSignScale : kTanhScale;
        return QTensor(std::move(dims), std::move(codes), scale, Signedness::Unsigned, kActBits);
    }
    }
    fail(ErrorKind::Validation, "unknown_activation", "unknown activation kind");
}

}  // namespace lightator::quant
