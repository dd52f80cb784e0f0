// Writes the reconstructed test networks (manifest + seeded f32 blobs) and a
// few sample images into an output directory.
//
//   make_fixtures <out_dir>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "lightator/image.hpp"
#include "lightator/netir.hpp"

namespace fs = std::filesystem;
using namespace lightator;

namespace {

class Builder {
public:
    Builder(std::string name, netir::Dims input, std::uint64_t seed) : rng_(seed) {
        model_.name = std::move(name);
        model_.input = input;
    }

    Builder& conv(std::size_t k, std::size_t c_in, std::size_t c_out, std::size_t padding, int bits = 4) {
        netir::LayerDesc l;
        l.kind = netir::ConvSpec{k, c_in, c_out, 1, padding};
        return weighted(std::move(l), k * k * c_in, bits);
    }

    Builder& fc(std::size_t n_in, std::size_t n_out, int bits = 4) {
        netir::LayerDesc l;
        l.kind = netir::FcSpec{n_in, n_out};
        return weighted(std::move(l), n_in, bits);
    }

    Builder& pool(std::size_t p, bool gray = false) {
        netir::LayerDesc l;
        l.kind = netir::CaSpec{p, p, gray};
        model_.layers.push_back(std::move(l));
        return *this;
    }

    Builder& act(quant::ActivationKind fn = quant::ActivationKind::ReLU) {
        netir::LayerDesc l;
        l.kind = netir::ActSpec{fn};
        model_.layers.push_back(std::move(l));
        return *this;
    }

    void save(const fs::path& dir) {
        netir::quantize_model(model_);
        netir::save_model(model_, dir / "manifest.json");
        std::cout << dir.string() << ": " << model_.layers.size() << " layers\n";
    }

private:
    Builder& weighted(netir::LayerDesc l, std::size_t fan_in, int bits) {
        l.weight_bits = bits;
        l.blob = "layer" + std::to_string(model_.layers.size()) + ".f32";
        // Uniform He-style init from raw engine bits, identical on every platform.
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        l.weights.resize(l.expected_weight_count());
        for (auto& w : l.weights) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            w = static_cast<float>(limit * (2.0 * u - 1.0));
        }
        model_.layers.push_back(std::move(l));
        return *this;
    }

    netir::ModelDesc model_;
    std::mt19937_64 rng_;
};

// Thick stroke "7"-like glyph on a dark background.
std::vector<std::uint8_t> digit_image(std::size_t n) {
    std::vector<std::uint8_t> px(n * n, 0);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double fy = static_cast<double>(y), fx = static_cast<double>(x), fn = static_cast<double>(n);
            const bool top = fy >= fn / 5 && fy < fn / 5 + 3 && fx >= fn / 5 && fx < 4 * fn / 5;
            const double diag = 4 * fn / 5 - (fy - fn / 5) * 0.45;
            const bool stem = fy >= fn / 5 && fy < 4 * fn / 5 && std::abs(fx - diag) < 1.6;
            if (top || stem) px[y * n + x] = 240;
        }
    return px;
}

std::vector<std::uint8_t> rgb_image(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto noise = [&rng] { return static_cast<int>(rng() % 41) - 20; };
    std::vector<std::uint8_t> chw(3 * n * n);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const int base = static_cast<int>((c == 0 ? x : c == 1 ? y : (x + y) / 2) * 255 / n);
                chw[(c * n + y) * n + x] = static_cast<std::uint8_t>(std::clamp(base + noise(), 0, 255));
            }
    return chw;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixtures <out_dir>\n";
        return 2;
    }
    const fs::path out = argv[1];
    try {
        fs::create_directories(out);
        using quant::ActivationKind;

        Builder("lenet-like", {28, 28, 1}, 101)
            .conv(3, 1, 6, 1).act().pool(2)
            .conv(3, 6, 16, 0).act().pool(2)
            .fc(576, 120).act()
            .fc(120, 10)
            .save(out / "lenet-like");

        Builder("vgg9-like", {32, 32, 3}, 202)
            .conv(3, 3, 64, 1).act().conv(3, 64, 64, 1).act().pool(2)
            .conv(3, 64, 128, 1).act().conv(3, 128, 128, 1).act().pool(2)
            .conv(3, 128, 256, 1).act().conv(3, 256, 256, 1).act().pool(2)
            .fc(4096, 256).act().fc(256, 256).act()
            .fc(256, 10)
            .save(out / "vgg9-like");

        Builder("vgg9-like-ca", {32, 32, 3}, 303)
            .pool(2, true)
            .conv(3, 1, 64, 1).act().conv(3, 64, 64, 1).act().pool(2)
            .conv(3, 64, 128, 1).act().conv(3, 128, 128, 1).act().pool(2)
            .conv(3, 128, 256, 1).act().conv(3, 256, 256, 1).act().pool(2)
            .fc(1024, 256).act().fc(256, 256).act()
            .fc(256, 10)
            .save(out / "vgg9-like-ca");

        Builder("k7", {32, 32, 1}, 404)
            .conv(7, 1, 4, 0).act(ActivationKind::Tanh)
            .fc(26 * 26 * 4, 10, 3)
            .save(out / "k7");

        fs::create_directories(out / "images");
        image::write_pnm(out / "images" / "digit7.pgm", {28, 28, 1}, digit_image(28));
        image::write_pnm(out / "images" / "scene32.ppm", {32, 32, 3}, rgb_image(32, 7));
        image::write_pnm(out / "images" / "white4.ppm", {4, 4, 3}, std::vector<std::uint8_t>(48, 255));
        image::write_pnm(out / "images" / "ramp32.pgm", {32, 32, 1}, [] {
            std::vector<std::uint8_t> v(32 * 32);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(i % 256);
            return v;
        }());
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
