#include <cmath>

#include <gtest/gtest.h>

#include "lightator/config.hpp"
#include "lightator/mapper.hpp"
#include "lightator/power.hpp"
#include "support.hpp"

using namespace lightator;
using namespace lightator::power;

namespace {

std::vector<mapper::MappingPlan> plans_at(const std::string& fixture, int bits) {
    auto m = netir::load_model(testkit::fixture(fixture));
    netir::apply_precision(m, {bits});
    return mapper::plan_model(m);
}

EnergyConfig shipped() { return config::load_config(testkit::config_dir() / "paper-calibration.cfg").energy; }

}  // namespace

TEST(Power, DacSlices) {
    EXPECT_EQ(dac_slices(4), 15);
    EXPECT_EQ(dac_slices(3), 7);
    EXPECT_EQ(dac_slices(2), 3);
    EXPECT_THROW(dac_slices(5), Error);
}

TEST(Power, ComponentFormulas) {
    mapper::MappingPlan p;
    p.weight_bits = 3;
    p.cycles = 10;
    p.reprogram_events = 2;
    p.mr_writes = 1000;
    p.multiplies = 5000;
    p.crc_pixels = 64;
    p.bpd_reads = 600;
    p.readouts = 100;
    EnergyConfig e;
    e.e_dac_slice_j = 1e-12;
    e.e_tune_per_mr_j = 2e-12;
    e.e_vcsel_per_symbol_j = 3e-14;
    e.e_crc_per_pixel_j = 4e-14;
    e.e_bpd_per_read_j = 5e-14;
    e.e_adc_per_conv_j = 6e-13;
    e.p_misc_static_w = 0.01;
    e.core_clock_hz = 1e6;
    e.stall_cycles_per_swap = 3;
    const auto lp = layer_power(p, e);
    const double t = 16e-6;
    EXPECT_EQ(lp.time_cycles(), 16u);
    EXPECT_NEAR(lp.watts[DAC], 1000 * 7 * 1e-12 / t, 1e-15);
    EXPECT_NEAR(lp.watts[TUN], 1000 * 2e-12 / t, 1e-15);
    EXPECT_NEAR(lp.watts[DMVA], (5000 * 3e-14 + 64 * 4e-14) / t, 1e-15);
    EXPECT_NEAR(lp.watts[BPD], 600 * 5e-14 / t, 1e-15);
    EXPECT_NEAR(lp.watts[ADC], 100 * 6e-13 / t, 1e-15);
    EXPECT_NEAR(lp.watts[MISC], 0.01, 1e-15);
    EXPECT_NEAR(lp.total_w(), sum(lp.watts), 1e-15);
}

TEST(Power, ZeroConfigAndLinearity) {
    const auto plans = plans_at("lenet-like", 4);
    EnergyConfig zero;
    zero.e_dac_slice_j = zero.e_tune_per_mr_j = zero.e_vcsel_per_symbol_j = zero.e_crc_per_pixel_j = 0;
    zero.e_bpd_per_read_j = zero.e_adc_per_conv_j = zero.p_misc_static_w = 0;
    for (const auto& p : plans)
        for (double w : layer_power(p, zero).watts) EXPECT_EQ(w, 0.0);

    EnergyConfig base;
    EnergyConfig twice = base;
    twice.e_dac_slice_j *= 2;
    for (const auto& p : plans) {
        const auto a = layer_power(p, base);
        const auto b = layer_power(p, twice);
        for (std::size_t c = 0; c < kComponents; ++c)
            EXPECT_DOUBLE_EQ(b.watts[c], c == DAC ? 2 * a.watts[c] : a.watts[c]);
    }
}

TEST(Power, NetworkAdditivity) {
    const auto plans = plans_at("vgg9-like", 4);
    const EnergyConfig e;
    const auto r = network_report(plans, e);
    double energy = 0.0;
    double weighted = 0.0;
    std::size_t cycles = 0;
    double max_w = 0.0;
    for (const auto& lp : r.layers) {
        energy += lp.total_j();
        weighted += lp.total_w() * static_cast<double>(lp.time_cycles());
        cycles += lp.time_cycles();
        max_w = std::max(max_w, lp.total_w());
    }
    EXPECT_EQ(r.frame_cycles, cycles);
    EXPECT_NEAR(r.network_w, weighted / static_cast<double>(cycles), 1e-9 * r.network_w);
    EXPECT_NEAR(r.frame_energy_j, energy, 1e-9 * energy);
    EXPECT_DOUBLE_EQ(r.fps, e.core_clock_hz / static_cast<double>(cycles));
    EXPECT_NEAR(r.kfps_per_w, r.fps / 1000.0 / r.network_w, 1e-9 * r.kfps_per_w);
    EXPECT_EQ(r.max_power_w, max_w);
}

TEST(Power, MonotoneInPrecision) {
    const EnergyConfig e;
    double prev_max = INFINITY;
    double prev_net = INFINITY;
    for (int b : {4, 3, 2}) {
        const auto r = network_report(plans_at("vgg9-like", b), e);
        EXPECT_LT(r.max_power_w, prev_max);
        EXPECT_LT(r.network_w, prev_net);
        prev_max = r.max_power_w;
        prev_net = r.network_w;
    }
}

TEST(Power, TwoPointFit) {
    const std::vector<PowerPoint> pts{{4, 5.28}, {3, 2.71}};
    const auto f = calibrate(pts);
    EXPECT_NEAR(f.alpha, (5.28 - 2.71) / 8.0, 1e-12);
    EXPECT_NEAR(f.beta, 5.28 - 15 * (5.28 - 2.71) / 8.0, 1e-12);
    EXPECT_NEAR(f.alpha, 0.32125, 1e-12);
    EXPECT_NEAR(f.beta, 0.46125, 1e-12);
    EXPECT_NEAR(f.predict(2), 1.425, 1e-12);
    EXPECT_LT(std::abs(f.predict(2) - 1.46) / 1.46, 0.05);

    const std::vector<PowerPoint> flat{{4, 2.0}, {3, 2.0}};
    EXPECT_EQ(calibrate(flat).alpha, 0.0);
    EXPECT_DOUBLE_EQ(calibrate(flat).beta, 2.0);
    const std::vector<PowerPoint> same{{4, 1.0}, {4, 2.0}};
    EXPECT_THROW(calibrate(same), Error);
    const std::vector<PowerPoint> one{{4, 1.0}};
    EXPECT_THROW(calibrate(one), Error);
}

TEST(Power, LeastSquaresThreePoints) {
    // Exact line through three points is recovered.
    const std::vector<PowerPoint> pts{{4, 0.2 * 15 + 0.1}, {3, 0.2 * 7 + 0.1}, {2, 0.2 * 3 + 0.1}};
    const auto f = calibrate(pts);
    EXPECT_NEAR(f.alpha, 0.2, 1e-12);
    EXPECT_NEAR(f.beta, 0.1, 1e-12);
    // Non-negativity: a decreasing trend clamps alpha.
    const std::vector<PowerPoint> down{{4, 1.0}, {2, 3.0}};
    EXPECT_EQ(calibrate(down).alpha, 0.0);
}

TEST(Power, FitReproducesShippedProfile) {
    const auto plans = plans_at("vgg9-like", 4);
    const auto r = fit_energy_config(plans);
    const auto e = shipped();
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    EXPECT_LT(rel(r.config.e_dac_slice_j, e.e_dac_slice_j), 1e-12);
    EXPECT_LT(rel(r.config.e_tune_per_mr_j, e.e_tune_per_mr_j), 1e-12);
    EXPECT_LT(rel(r.config.core_clock_hz, e.core_clock_hz), 1e-12);
    EXPECT_LT(rel(r.config.p_misc_static_w, e.p_misc_static_w), 1e-12);
    EXPECT_EQ(r.peak_layer, network_report(plans, r.config).max_power_layer);

    // The peak layer follows alpha (2^b - 1) + beta at every precision.
    for (int b : {4, 3, 2}) {
        const auto rep = network_report(plans_at("vgg9-like", b), r.config);
        const auto it = std::find_if(rep.layers.begin(), rep.layers.end(),
                                     [&](const LayerPower& lp) { return lp.layer_index == r.peak_layer; });
        ASSERT_NE(it, rep.layers.end());
        EXPECT_NEAR(it->total_w(), r.fit.predict(b), 1e-9 * r.fit.predict(b));
    }
    EXPECT_NEAR(network_report(plans, r.config).kfps_per_w, 61.61, 1e-9);
}

TEST(Power, ShippedProfileDacShare) {
    const auto r = network_report(plans_at("vgg9-like", 3), shipped());
    for (const auto& lp : r.layers) {
        if (lp.kind == "conv") {
            EXPECT_GT(lp.share(DAC), 0.85) << "layer " << lp.layer_index;
        }
    }
}

TEST(Power, CsvAndJsonShapes) {
    const auto r = network_report(plans_at("lenet-like", 4), EnergyConfig{});
    const auto csv = to_csv(r);
    EXPECT_EQ(csv.rfind("layer,kind,component,watts\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + r.layers.size() * kComponents);
    const auto j = to_json(r);
    EXPECT_EQ(j["layers"].size(), r.layers.size());
    EXPECT_TRUE(j.contains("kfps_per_w"));
}
