#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lightator/error.hpp"

namespace lightator::compress {

// Fused grayscale conversion + non-overlapping mean pooling.
struct CompressionSpec {
    std::size_t pool_h = 2;
    std::size_t pool_w = 2;
    bool fuse_grayscale = true;

    std::size_t channels_in() const noexcept { return fuse_grayscale ? 3 : 1; }
    std::size_t dot_length() const noexcept { return pool_h * pool_w * channels_in(); }
    bool operator==(const CompressionSpec&) const = default;
};

inline constexpr std::array<double, 3> grayscale_coefficients() { return {0.299, 0.587, 0.114}; }

// Weight for pixel p (row-major in the window) and channel j is
// c_j / (pool_h * pool_w); without fusion every weight is 1 / (pool_h * pool_w).
inline std::vector<double> fused_weights(const CompressionSpec& spec) {
    if (spec.pool_h == 0 || spec.pool_w == 0)
        fail(ErrorKind::Validation, "pool_dims", "pool dimensions must be >= 1");
    const double inv = 1.0 / static_cast<double>(spec.pool_h * spec.pool_w);
    std::vector<double> w;
    w.reserve(spec.dot_length());
    for (std::size_t p = 0; p < spec.pool_h * spec.pool_w; ++p) {
        if (spec.fuse_grayscale) {
            for (double c : grayscale_coefficients()) w.push_back(inv * c);
        } else {
            w.push_back(inv);
        }
    }
    return w;
}

// Same weights as exact integers over a common divisor. The reference path
// accumulates integer samples with these and divides once, which keeps the
// constant-frame identity exact.
struct IntegerWeights {
    std::vector<std::int64_t> numerators;
    std::int64_t divisor = 1;
};

inline IntegerWeights integer_weights(const CompressionSpec& spec) {
    if (spec.pool_h == 0 || spec.pool_w == 0)
        fail(ErrorKind::Validation, "pool_dims", "pool dimensions must be >= 1");
    constexpr std::array<std::int64_t, 3> per_mille{299, 587, 114};
    IntegerWeights out;
    const auto window = static_cast<std::int64_t>(spec.pool_h * spec.pool_w);
    out.divisor = spec.fuse_grayscale ? 1000 * window : window;
    for (std::int64_t p = 0; p < window; ++p) {
        if (spec.fuse_grayscale) {
            out.numerators.insert(out.numerators.end(), per_mille.begin(), per_mille.end());
        } else {
            out.numerators.push_back(1);
        }
    }
    return out;
}

}  // namespace lightator::compress
