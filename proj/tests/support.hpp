#pragma once

// Shared helpers for the unit and acceptance tests: fixture paths and a
// generator of small random models and frames.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lightator/image.hpp"
#include "lightator/netir.hpp"

namespace lightator::testkit {

inline std::filesystem::path fixture_dir() { return LIGHTATOR_FIXTURE_DIR; }
inline std::filesystem::path config_dir() { return LIGHTATOR_CONFIG_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return fixture_dir() / name / "manifest.json"; }

class ModelGen {
public:
    explicit ModelGen(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

    // 1-4 linear layers: an optional CA front, convs, and an optional FC
    // tail; each non-final linear layer may be followed by any activation.
    netir::ModelDesc model() {
        netir::ModelDesc m;
        m.name = "random";
        netir::Dims cur{pick(4, 10), pick(4, 10), pick(1, 3)};
        m.input = cur;
        const std::size_t n_linear = pick(1, 4);
        for (std::size_t i = 0; i < n_linear; ++i) {
            const bool last = i + 1 == n_linear;
            netir::LayerDesc l;
            l.weight_bits = static_cast<int>(pick(2, 4));
            const bool can_pool = cur.h % 2 == 0 && cur.w % 2 == 0 && cur.h >= 2;
            if (i == 0 && can_pool && coin(0.3)) {
                l.kind = netir::CaSpec{2, 2, cur.c == 3 && coin()};
            } else if (last && coin(0.4)) {
                // Occasionally long enough to span several banks.
                l.kind = netir::FcSpec{cur.size(), pick(1, 12)};
            } else {
                const std::size_t pad = pick(0, 1);
                const std::size_t k = pick(1, std::min<std::size_t>(5, std::min(cur.h, cur.w) + 2 * pad));
                const std::size_t stride = pick(1, 2);
                l.kind = netir::ConvSpec{k, cur.c, pick(1, 7), stride, pad};
            }
            fill(l);
            cur = netir::layer_output_dims(l, cur, m.layers.size());
            m.layers.push_back(std::move(l));
            if (!last && coin(0.8)) {
                netir::LayerDesc a;
                const std::size_t fn = pick(0, 5);
                a.kind = netir::ActSpec{fn == 0 ? quant::ActivationKind::Sign
                                        : fn == 1 ? quant::ActivationKind::Tanh
                                                  : quant::ActivationKind::ReLU};
                m.layers.push_back(a);
            } else if (last && coin(0.3)) {
                netir::LayerDesc a;
                a.kind = netir::ActSpec{quant::ActivationKind::ReLU};
                m.layers.push_back(a);
            }
        }
        netir::quantize_model(m);
        return m;
    }

    image::Frame frame(const netir::Dims& dims) {
        std::vector<std::uint8_t> src(dims.size());
        const std::size_t style = pick(0, 3);
        for (auto& v : src) v = style == 0 ? static_cast<std::uint8_t>(pick(0, 1) * 255)
                                           : static_cast<std::uint8_t>(pick(0, 255));
        return image::make_frame(dims, std::move(src));
    }

    std::vector<double> weights(std::size_t n, double limit = 1.0) {
        std::uniform_real_distribution<double> u(-limit, limit);
        std::vector<double> w(n);
        for (auto& x : w) x = u(rng_);
        return w;
    }

private:
    void fill(netir::LayerDesc& l) {
        if (l.is_ca()) return;
        l.weights = weights(l.expected_weight_count());
    }

    std::mt19937_64 rng_;
};

// A conv/fc layer with the given raw weights, already quantized.
inline netir::LayerDesc weighted_layer(netir::LayerKind kind, std::vector<double> w, int bits = 4) {
    netir::LayerDesc l;
    l.kind = kind;
    l.weight_bits = bits;
    l.weights = std::move(w);
    netir::quantize_layer(l);
    return l;
}

}  // namespace lightator::testkit
