#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lightator/quant.hpp"

using namespace lightator;
using namespace lightator::quant;

TEST(Quant, WeightSpec) {
    const std::vector<double> w{0.1, -0.7, 0.3};
    EXPECT_DOUBLE_EQ(make_weight_qspec(w, 4).weight_scale, 0.1);
    const std::vector<double> z(5, 0.0);
    const auto zs = make_weight_qspec(z, 3);
    EXPECT_EQ(zs.weight_scale, 1.0);
    const auto qz = quantize_weights(z, {5}, zs);
    for (auto l : qz.levels()) EXPECT_EQ(l, 0);
    const std::vector<double> u{1.0, -1.0, 0.4, -0.6};
    const auto s2 = make_weight_qspec(u, 2);
    EXPECT_EQ(s2.weight_scale, 1.0);
    const auto qu = quantize_weights(u, {4}, s2);
    for (auto l : qu.levels()) EXPECT_TRUE(l >= -1 && l <= 1);
    EXPECT_THROW(make_weight_qspec(w, 5), Error);
    EXPECT_THROW(make_weight_qspec(w, 1), Error);
    EXPECT_THROW(make_weight_qspec({}, 4), Error);
}

TEST(Quant, LevelRanges) {
    EXPECT_EQ(weight_level_max(4), 7);
    EXPECT_EQ(weight_level_max(3), 3);
    EXPECT_EQ(weight_level_max(2), 1);
    EXPECT_THROW(QTensor({2}, {8, 0}, 1.0, Signedness::Signed, 4), Error);
    EXPECT_THROW(QTensor({2}, {-8, 0}, 1.0, Signedness::Signed, 4), Error);
    EXPECT_THROW(QTensor({2}, {16, 0}, 1.0, Signedness::Unsigned, 4), Error);
    EXPECT_THROW(QTensor({3}, {1, 0}, 1.0, Signedness::Unsigned, 4), Error);
    EXPECT_THROW(QTensor({1}, {1}, 0.0, Signedness::Unsigned, 4), Error);
}

TEST(Quant, Rounding) {
    EXPECT_EQ(quantize_value(0.35, 0.1, Signedness::Signed, 4), 4);
    EXPECT_EQ(quantize_value(-0.35, 0.1, Signedness::Signed, 4), -4);
    EXPECT_EQ(quantize_value(0.0, 0.1, Signedness::Signed, 4), 0);
    EXPECT_EQ(quantize_value(9.9, 0.1, Signedness::Signed, 4), 7);
    EXPECT_EQ(quantize_value(-9.9, 0.1, Signedness::Signed, 4), -7);
    EXPECT_EQ(round_half_away(2.5), 3);
    EXPECT_EQ(round_half_away(-2.5), -3);
    EXPECT_EQ(round_half_away(2.49), 2);
}

TEST(Quant, ErrorBoundAndSymmetry) {
    std::mt19937_64 rng(1);
    for (int bits = 2; bits <= 4; ++bits) {
        const double scale = 0.037;
        const double limit = weight_level_max(bits) * scale;
        std::uniform_real_distribution<double> u(-limit, limit);
        for (int i = 0; i < 5000; ++i) {
            const double x = u(rng);
            const auto q = quantize_value(x, scale, Signedness::Signed, bits);
            EXPECT_LE(std::abs(q * scale - x), scale / 2 + 1e-12);
            EXPECT_EQ(quantize_value(-x, scale, Signedness::Signed, bits), -q);
        }
    }
}

TEST(Quant, Activations) {
    EXPECT_EQ(apply_activation(ActivationKind::Sign, 3, 1.0, 1.0), 15);
    EXPECT_EQ(apply_activation(ActivationKind::Sign, 0, 1.0, 1.0), 0);
    EXPECT_EQ(apply_activation(ActivationKind::Sign, -3, 1.0, 1.0), 0);
    EXPECT_EQ(apply_activation(ActivationKind::ReLU, -5, 0.3, 0.01), 0);
    EXPECT_EQ(apply_activation(ActivationKind::ReLU, 10, 0.1, 0.2), 5);
    EXPECT_EQ(apply_activation(ActivationKind::Tanh, 0, 1.0, 1.0), 8);
    EXPECT_EQ(apply_activation(ActivationKind::Tanh, 1000, 1.0, 1.0), 15);
    EXPECT_EQ(apply_activation(ActivationKind::Tanh, -1000, 1.0, 1.0), 0);
    EXPECT_THROW(parse_activation("gelu"), Error);
}

TEST(Quant, TanhLutMatchesNearestCode) {
    // Each code c stands for tanh = 2c/15 - 1; the LUT picks the nearest one.
    for (int i = -3000; i <= 3000; ++i) {
        const double x = i * 1e-3;
        const double y = std::tanh(x);
        const int code = TanhLut::instance().code(x);
        const double err = std::abs(2.0 * code / 15.0 - 1.0 - y);
        for (int c = 0; c <= 15; ++c) EXPECT_LE(err, std::abs(2.0 * c / 15.0 - 1.0 - y) + 1e-12);
    }
}

TEST(Quant, ActivationsAreMonotone) {
    for (auto kind : {ActivationKind::ReLU, ActivationKind::Tanh, ActivationKind::Sign}) {
        int prev = 0;
        for (std::int64_t a = -400; a <= 400; ++a) {
            const int c = apply_activation(kind, a, 0.01, 0.2);
            EXPECT_GE(c, prev);
            prev = c;
        }
    }
}

TEST(Quant, RequantizeFeaturemap) {
    const std::vector<double> uniform(6, 0.8);
    const auto qn = requantize_featuremap(uniform, {6});
    for (auto l : qn.levels()) EXPECT_EQ(l, 15);
    const double mx = 2.4;
    const std::vector<double> v{0.0, mx / 3, mx};
    const auto q = requantize_featuremap(v, {3});
    EXPECT_EQ(q.levels()[0], 0);
    EXPECT_EQ(q.levels()[1], 5);
    EXPECT_EQ(q.levels()[2], 15);
    EXPECT_DOUBLE_EQ(q.scale(), mx / 15);
    EXPECT_THROW(requantize_featuremap({}, {0}), Error);
    const auto frozen = requantize_featuremap(v, {3}, 0.4);
    EXPECT_EQ(frozen.levels()[2], 6);
}

TEST(Quant, ActivateFeaturemapClipsBeforeScaling) {
    const std::vector<std::int64_t> acc{-50, 0, 10, 30};
    const auto q = activate_featuremap(ActivationKind::ReLU, acc, 0.1, {4});
    EXPECT_EQ(q.levels()[0], 0);
    EXPECT_EQ(q.levels()[3], 15);
    EXPECT_EQ(q.levels()[2], 5);
    const auto s = activate_featuremap(ActivationKind::Sign, acc, 0.1, {4});
    EXPECT_DOUBLE_EQ(s.scale(), 1.0 / 15);
    EXPECT_DOUBLE_EQ(s.dequantize(3), 1.0);
}
