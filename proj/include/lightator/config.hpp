#pragma once

// Run configuration: a flat "key = value" file. '#' starts a comment, blank
// lines are ignored, unknown or repeated keys are rejected. Every key is
// optional; serialize(RunConfig{}) lists the defaults.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lightator/core.hpp"
#include "lightator/error.hpp"
#include "lightator/image.hpp"
#include "lightator/photonics.hpp"
#include "lightator/power.hpp"
#include "lightator/sim.hpp"

namespace lightator::config {

struct RunConfig {
    std::string profile = "default";

    double mr_n_eff = 2.4;
    double mr_circumference_um = 6.45;
    std::size_t mr_mode_order = 10;
    double mr_fwhm_nm = 0.2;
    double mr_t_min = 0.05;
    double mr_t_max = 0.95;

    image::CrcRange crc;
    core::CoreGeometry geometry;
    bool allow_stride_split = true;

    double noise_sigma = 0.0;
    bool quantize_transmission = false;
    std::size_t seed = 1;

    power::EnergyConfig energy;
    std::size_t threads = 1;

    photonics::MRDeviceParams mr() const {
        return {mr_n_eff, mr_circumference_um, static_cast<int>(mr_mode_order), mr_fwhm_nm, mr_t_min};
    }

    core::DeviceModel device_model() const {
        core::DeviceModel d;
        d.encoding.device = mr();
        d.encoding.t_max = mr_t_max;
        d.encoding.quantize_transmission = quantize_transmission;
        d.noise_sigma = noise_sigma;
        d.seed = seed;
        return d;
    }

    sim::RunOptions run_options(core::ExecMode mode = core::ExecMode::Ideal) const {
        sim::RunOptions o;
        o.exec.mode = mode;
        o.exec.device = device_model();
        o.exec.threads = static_cast<unsigned>(threads);
        o.geometry = geometry;
        o.allow_split = allow_stride_split;
        o.energy = energy;
        return o;
    }

    void validate() const {
        (void)mr();
        if (!(mr_t_max > mr_t_min && mr_t_max < 1.0))
            fail(ErrorKind::Validation, "config_value", "mr.t_max must lie in (mr.t_min, 1)");
        if (!(crc.v_lo < crc.v_hi)) fail(ErrorKind::Validation, "config_value", "crc.v_lo must be below crc.v_hi");
        if (geometry.n_banks() == 0) fail(ErrorKind::Validation, "config_value", "core needs at least one bank");
        if (!(noise_sigma >= 0.0)) fail(ErrorKind::Validation, "config_value", "device.noise_sigma must be >= 0");
        if (threads == 0) fail(ErrorKind::Validation, "config_value", "sim.threads must be >= 1");
        energy.validate();
    }
};

namespace detail {

using Slot = std::variant<double*, std::size_t*, bool*, std::string*>;

struct Key {
    const char* name;
    Slot slot;
};

inline std::vector<Key> keys(RunConfig& c) {
    return {
        {"profile", &c.profile},
        {"mr.n_eff", &c.mr_n_eff},
        {"mr.circumference_um", &c.mr_circumference_um},
        {"mr.mode_order", &c.mr_mode_order},
        {"mr.fwhm_nm", &c.mr_fwhm_nm},
        {"mr.t_min", &c.mr_t_min},
        {"mr.t_max", &c.mr_t_max},
        {"crc.v_lo", &c.crc.v_lo},
        {"crc.v_hi", &c.crc.v_hi},
        {"core.bank_rows", &c.geometry.bank_rows},
        {"core.bank_cols", &c.geometry.bank_cols},
        {"core.allow_stride_split", &c.allow_stride_split},
        {"device.noise_sigma", &c.noise_sigma},
        {"device.quantize_transmission", &c.quantize_transmission},
        {"device.seed", &c.seed},
        {"energy.e_dac_slice_j", &c.energy.e_dac_slice_j},
        {"energy.e_tune_per_mr_j", &c.energy.e_tune_per_mr_j},
        {"energy.e_vcsel_per_symbol_j", &c.energy.e_vcsel_per_symbol_j},
        {"energy.e_crc_per_pixel_j", &c.energy.e_crc_per_pixel_j},
        {"energy.e_bpd_per_read_j", &c.energy.e_bpd_per_read_j},
        {"energy.e_adc_per_conv_j", &c.energy.e_adc_per_conv_j},
        {"energy.p_misc_static_w", &c.energy.p_misc_static_w},
        {"energy.core_clock_hz", &c.energy.core_clock_hz},
        {"sim.stall_cycles_per_swap", &c.energy.stall_cycles_per_swap},
        {"sim.threads", &c.threads},
    };
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
T parse_unsigned(const std::string& text, const std::string& key, std::size_t line) {
    T v{};
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size())
        fail(ErrorKind::Parse, "bad_value", "line " + std::to_string(line) + ": '" + key + "' needs a non-negative integer");
    return v;
}

inline void assign(const Slot& slot, const std::string& text, const std::string& key, std::size_t line) {
    if (auto* d = std::get_if<double*>(&slot)) {
        std::size_t used = 0;
        try {
            **d = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size())
            fail(ErrorKind::Parse, "bad_value", "line " + std::to_string(line) + ": '" + key + "' needs a number");
    } else if (auto* z = std::get_if<std::size_t*>(&slot)) {
        **z = parse_unsigned<std::size_t>(text, key, line);
    } else if (auto* b = std::get_if<bool*>(&slot)) {
        if (text == "true")
            **b = true;
        else if (text == "false")
            **b = false;
        else
            fail(ErrorKind::Parse, "bad_value", "line " + std::to_string(line) + ": '" + key + "' needs true or false");
    } else {
        *std::get<std::string*>(slot) = text;
    }
}

inline std::string render(const Slot& slot) {
    if (auto* d = std::get_if<double*>(&slot)) return format_double(**d);
    if (auto* z = std::get_if<std::size_t*>(&slot)) return std::to_string(**z);
    if (auto* b = std::get_if<bool*>(&slot)) return **b ? "true" : "false";
    return *std::get<std::string*>(slot);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    auto table = detail::keys(cfg);
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const auto line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Parse, "bad_line", "line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        const auto it = std::find_if(table.begin(), table.end(), [&](const detail::Key& k) { return key == k.name; });
        if (it == table.end())
            fail(ErrorKind::Validation, "unknown_key", "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            fail(ErrorKind::Validation, "duplicate_key", "line " + std::to_string(line_no) + ": '" + key + "' set twice");
        detail::assign(it->slot, value, key, line_no);
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "missing_config", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// Canonical form: every key in table order, doubles round-trippable.
inline std::string serialize(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::string out;
    for (const auto& k : detail::keys(copy)) out += std::string(k.name) + " = " + detail::render(k.slot) + "\n";
    return out;
}

// FNV-1a over the canonical form, as 16 hex digits.
inline std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

}  // namespace lightator::config
