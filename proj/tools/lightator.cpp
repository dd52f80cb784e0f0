// lightator: map, run, power, compress and calibrate from the command line.
//
// Exit codes: 0 ok, 2 usage, 3 parse or I/O, 4 validation, 5 capacity.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lightator/compress.hpp"
#include "lightator/config.hpp"
#include "lightator/image.hpp"
#include "lightator/mapper.hpp"
#include "lightator/netir.hpp"
#include "lightator/power.hpp"
#include "lightator/sim.hpp"

namespace fs = std::filesystem;
using namespace lightator;
using json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Io: return 3;
    case ErrorKind::Capacity: return 5;
    default: return 4;
    }
}

struct Common {
    std::string config_path;
    std::string out_path;

    config::RunConfig config() const {
        return config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
    }
};

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "write_failed", "cannot write " + out_path);
    out << text;
}

json header(const config::RunConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["config_hash"] = config::config_hash(cfg);
    j["profile"] = cfg.profile;
    return j;
}

// "4:4,3:4" or "4,3"; activations are always 4-bit.
std::vector<int> parse_precision(const std::string& text) {
    std::vector<int> bits;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        const std::string w = item.substr(0, colon);
        if (colon != std::string::npos && item.substr(colon + 1) != "4")
            fail(ErrorKind::Validation, "unsupported_precision", "activation precision must be 4 in '" + item + "'");
        try {
            std::size_t used = 0;
            bits.push_back(std::stoi(w, &used));
            if (used != w.size()) throw std::invalid_argument(w);
        } catch (const std::exception&) {
            fail(ErrorKind::Validation, "unsupported_precision", "bad precision entry '" + item + "'");
        }
        quant::check_weight_bits(bits.back());
    }
    if (bits.empty()) fail(ErrorKind::Validation, "unsupported_precision", "empty precision list");
    return bits;
}

// "2x2" or "2"
compress::CompressionSpec parse_pool(const std::string& text, bool gray) {
    compress::CompressionSpec spec;
    spec.fuse_grayscale = gray;
    const auto x = text.find('x');
    try {
        spec.pool_h = std::stoul(text.substr(0, x));
        spec.pool_w = x == std::string::npos ? spec.pool_h : std::stoul(text.substr(x + 1));
    } catch (const std::exception&) {
        fail(ErrorKind::Validation, "pool_dims", "bad pool size '" + text + "'");
    }
    if (spec.pool_h == 0 || spec.pool_w == 0) fail(ErrorKind::Validation, "pool_dims", "pool dimensions must be >= 1");
    return spec;
}

struct ModelArgs {
    std::string manifest;
    std::string precision;
    std::string pool;
    bool no_gray = false;

    void add(CLI::App* cmd) {
        cmd->add_option("manifest", manifest, "model manifest (JSON)")->required();
        cmd->add_option("--precision", precision, "per-layer weight precision, e.g. 4:4,3:4 (last entry repeats)");
        cmd->add_option("--compress", pool, "prepend compressive acquisition with this pool, e.g. 2x2");
        cmd->add_flag("--no-gray", no_gray, "compress without grayscale fusion");
    }

    netir::ModelDesc base() const {
        auto model = netir::load_model(manifest);
        if (!precision.empty()) netir::apply_precision(model, parse_precision(precision));
        return model;
    }

    std::optional<compress::CompressionSpec> spec() const {
        if (pool.empty()) return std::nullopt;
        return parse_pool(pool, !no_gray);
    }

    netir::ModelDesc effective() const {
        auto model = base();
        if (const auto s = spec()) model = netir::with_compression(model, *s);
        return model;
    }
};

json plan_json(const mapper::MappingPlan& p) {
    json j;
    j["layer"] = p.layer_index;
    j["kind"] = p.kind;
    j["weight_bits"] = p.weight_bits;
    j["dot_length"] = p.stride.dot_length;
    j["arms_per_stride"] = p.stride.arms_per_stride;
    j["summation"] = mapper::to_string(p.stride.summation);
    j["unused_mrs"] = p.stride.unused_mrs_per_stride;
    j["strides_per_bank"] = p.stride.bank_aligned() ? json(p.strides_per_bank) : json(nullptr);
    j["banks_per_stride"] = p.banks_per_stride;
    j["strides_per_load"] = p.strides_per_load;
    j["partial_cycles"] = p.partial_cycles;
    j["total_strides"] = p.total_strides;
    j["bank_loads"] = p.bank_loads;
    j["cycles"] = p.cycles;
    j["mr_writes"] = p.mr_writes;
    j["reprogram_events"] = p.reprogram_events;
    j["multiplies"] = p.multiplies;
    j["utilization"] = p.utilization;
    j["active_mr_fraction"] = p.active_mr_fraction;
    return j;
}

int cmd_map(const Common& common, const ModelArgs& args) {
    const auto cfg = common.config();
    const auto model = args.effective();
    const auto plans = mapper::plan_model(model, cfg.geometry, cfg.allow_stride_split);
    json j = header(cfg);
    j["model"] = model.name;
    auto layers = json::array();
    std::size_t cycles = 0;
    for (const auto& p : plans) {
        layers.push_back(plan_json(p));
        cycles += p.cycles;
    }
    j["layers"] = std::move(layers);
    j["total_cycles"] = cycles;
    emit(j.dump(2) + "\n", common.out_path);
    return 0;
}

int cmd_power(const Common& common, const ModelArgs& args, bool csv) {
    const auto cfg = common.config();
    const auto model = args.effective();
    const auto plans = mapper::plan_model(model, cfg.geometry, cfg.allow_stride_split);
    const auto report = power::network_report(plans, cfg.energy);
    if (csv) {
        emit(power::to_csv(report), common.out_path);
        return 0;
    }
    json j = header(cfg);
    j["model"] = model.name;
    const auto body = power::to_json(report);
    for (const auto& [k, v] : body.items()) j[k] = v;
    emit(j.dump(2) + "\n", common.out_path);
    return 0;
}

struct RunArgs {
    std::vector<std::string> images;
    std::string mode = "ideal";
    std::string dump_dir;
    bool freeze_scales = false;
};

void dump_feature_maps(const sim::RunResult& r, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    for (const auto& fm : r.feature_maps) {
        const std::size_t plane = fm.dims.h * fm.dims.w;
        for (std::size_t c = 0; c < fm.dims.c; ++c) {
            const auto levels = fm.codes.levels().subspan(c * plane, plane);
            const auto gray = image::codes_to_gray(levels);
            image::write_pnm(dir / (stem + "_layer" + std::to_string(fm.layer_index) + "_c" + std::to_string(c) + ".pgm"),
                             {fm.dims.h, fm.dims.w, 1}, gray);
        }
    }
}

int cmd_run(const Common& common, const ModelArgs& margs, const RunArgs& args) {
    const auto cfg = common.config();
    core::ExecMode mode = core::ExecMode::Ideal;
    if (args.mode == "device")
        mode = core::ExecMode::Device;
    else if (args.mode != "ideal")
        fail(ErrorKind::Validation, "unknown_mode", "mode must be ideal or device");
    auto opt = cfg.run_options(mode);
    opt.compress = margs.spec();
    auto base = margs.base();

    std::vector<image::Frame> frames;
    for (const auto& path : args.images) frames.push_back(image::load_image(path, cfg.crc));
    const auto batch = sim::run_batch(base, frames, opt);

    json j = header(cfg);
    j["model"] = base.name;
    j["mode"] = core::to_string(mode);
    j["compressed"] = opt.compress.has_value();
    auto out = json::array();
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& r = batch.results[f];
        json fj;
        fj["image"] = fs::path(args.images[f]).filename().string();
        fj["output"] = r.output;
        fj["argmax"] = r.argmax;
        fj["compute_cycles"] = r.compute_cycles;
        fj["stall_cycles"] = r.stall_cycles;
        fj["reprogram_events"] = r.reprogram_events;
        json scales = json::object();
        for (const auto& [layer, s] : r.act_scales) scales[std::to_string(layer)] = s;
        fj["act_scales"] = std::move(scales);
        out.push_back(std::move(fj));
        if (!args.dump_dir.empty())
            dump_feature_maps(r, args.dump_dir, fs::path(args.images[f]).stem().string());
    }
    j["frames"] = std::move(out);
    const auto& rep = batch.results.front().power;
    j["power"] = {{"max_power_w", rep.max_power_w},
                  {"network_w", rep.network_w},
                  {"fps", rep.fps},
                  {"kfps_per_w", rep.kfps_per_w}};
    j["batch_fps"] = batch.fps;

    if (args.freeze_scales) {
        const std::size_t shift = opt.compress ? 1 : 0;
        for (const auto& [layer, s] : batch.results.front().act_scales) {
            if (layer < shift) continue;
            base.layers[layer - shift].act_scale = s;
        }
        for (auto& l : base.layers)
            if (l.has_blob()) l.frozen_weight_scale = l.qweights.scale();
        netir::save_model(base, margs.manifest, false);
    }
    emit(j.dump(2) + "\n", common.out_path);
    return 0;
}

struct CompressArgs {
    std::string image;
    std::string pool = "2x2";
    bool no_gray = false;
    std::string path = "reference";
    int weight_bits = 4;
    std::string out;
};

int cmd_compress(const Common& common, const CompressArgs& args) {
    const auto cfg = common.config();
    const auto spec = parse_pool(args.pool, !args.no_gray);
    const auto path = compress::parse_path(args.path);
    quant::check_weight_bits(args.weight_bits);
    const auto frame = image::load_image(args.image, cfg.crc);
    auto ctx = cfg.run_options().exec;
    const auto result = compress::compress_frame(frame, spec, path, args.weight_bits, ctx, cfg.geometry);
    const auto gray = compress::to_gray8(result.values);
    image::write_pnm(args.out, result.dims, gray);

    json j = header(cfg);
    j["input"] = fs::path(args.image).filename().string();
    j["input_dims"] = {{"h", frame.dims.h}, {"w", frame.dims.w}, {"c", frame.dims.c}};
    j["output_dims"] = {{"h", result.dims.h}, {"w", result.dims.w}, {"c", result.dims.c}};
    j["spec"] = {{"pool_h", spec.pool_h}, {"pool_w", spec.pool_w}, {"fuse_grayscale", spec.fuse_grayscale}};
    j["path"] = compress::to_string(path);
    j["weight_bits"] = args.weight_bits;
    if (path == compress::Path::Optical) j["weight_scale"] = result.weight_scale;
    emit(j.dump(2) + "\n", args.out + ".json");
    return 0;
}

// Rounds to 12 significant digits so printed fits are stable.
double tidy(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::stod(buf);
}

struct CalibrateArgs {
    std::vector<std::string> points;
    std::vector<int> predict;
    std::string fit_manifest;
    std::string out;
};

std::string calibration_file(const power::CalibrationResult& r, const power::CalibrationTargets& t,
                             const std::string& model_name) {
    config::RunConfig cfg;
    cfg.profile = "paper-calibration";
    cfg.energy = r.config;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "# Energy profile fitted by `lightator calibrate --fit` on the %s fixture.\n"
                  "# Targets: peak layer %.4g W at 4-bit and %.4g W at 3-bit weights,\n"
                  "# %.4g KFPS/W at 4-bit, DAC share %.4g of an all-write layer at 3-bit.\n"
                  "# Fit: P(b) = %.6g * (2^b - 1) + %.6g W at the peak layer (layer %zu).\n"
                  "# Regenerate instead of editing by hand.\n\n",
                  model_name.c_str(), t.max_power_4b_w, t.max_power_3b_w, t.kfps_per_w_4b, t.dac_share_3b,
                  r.fit.alpha, r.fit.beta, r.peak_layer);
    return buf + config::serialize(cfg);
}

int cmd_calibrate(const Common& common, const CalibrateArgs& args) {
    if (!args.fit_manifest.empty()) {
        auto model = netir::load_model(args.fit_manifest);
        netir::apply_precision(model, {4});
        const auto cfg = common.config();
        const auto plans = mapper::plan_model(model, cfg.geometry, cfg.allow_stride_split);
        const power::CalibrationTargets targets;
        const auto result = power::fit_energy_config(plans, targets);
        const auto text = calibration_file(result, targets, model.name);
        emit(text, args.out);
        return 0;
    }
    std::vector<power::PowerPoint> pts;
    for (const auto& p : args.points) {
        const auto colon = p.find(':');
        if (colon == std::string::npos)
            fail(ErrorKind::Validation, "bad_point", "point '" + p + "' must be bits:watts");
        try {
            pts.push_back({std::stoi(p.substr(0, colon)), std::stod(p.substr(colon + 1))});
        } catch (const std::exception&) {
            fail(ErrorKind::Validation, "bad_point", "point '" + p + "' must be bits:watts");
        }
    }
    const auto fit = power::calibrate(pts);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["alpha"] = tidy(fit.alpha);
    j["beta"] = tidy(fit.beta);
    json pred = json::object();
    for (int b : args.predict) pred[std::to_string(b)] = tidy(fit.predict(b));
    j["predictions"] = std::move(pred);
    emit(j.dump(2) + "\n", args.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical near-sensor accelerator simulator"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "run configuration file");
        cmd->add_option("-o,--out", common.out_path, "output file (default: stdout)");
    };

    ModelArgs model_args;
    auto* map = app.add_subcommand("map", "print the mapping plan of every layer");
    model_args.add(map);
    add_common(map);

    ModelArgs run_model_args;
    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run frames through the simulator");
    run_model_args.add(run);
    run->add_option("images", run_args.images, "PGM/PPM frames")->required();
    run->add_option("--mode", run_args.mode, "ideal or device")->check(CLI::IsMember({"ideal", "device"}));
    run->add_option("--dump-dir", run_args.dump_dir, "write per-layer feature maps as PGM");
    run->add_flag("--freeze-scales", run_args.freeze_scales, "write this run's scales back into the manifest");
    add_common(run);

    ModelArgs power_args;
    bool csv = false;
    auto* pow = app.add_subcommand("power", "per-layer power report");
    power_args.add(pow);
    pow->add_flag("--csv", csv, "flat CSV instead of JSON");
    pow->add_flag("--json", [](std::int64_t) {}, "JSON output (default)");
    add_common(pow);

    CompressArgs comp_args;
    auto* comp = app.add_subcommand("compress", "compressive acquisition of one image");
    comp->add_option("image", comp_args.image, "input PPM/PGM")->required();
    comp->add_option("--pool", comp_args.pool, "pool size, e.g. 2x2");
    comp->add_flag("--no-gray", comp_args.no_gray, "keep channels instead of fusing to grayscale");
    comp->add_option("--path", comp_args.path, "optical or reference")->check(CLI::IsMember({"optical", "reference"}));
    comp->add_option("--weight-bits", comp_args.weight_bits, "CA weight precision (optical path)");
    comp->add_option("-o,--out", comp_args.out, "output PGM/PPM; a .json sidecar is written next to it")->required();
    comp->add_option("--config", common.config_path, "run configuration file");

    CalibrateArgs cal_args;
    auto* cal = app.add_subcommand("calibrate", "fit P(b) = alpha (2^b - 1) + beta, or fit an energy profile");
    cal->add_option("--point", cal_args.points, "bits:watts measurement");
    cal->add_option("--predict", cal_args.predict, "bit widths to predict");
    cal->add_option("--fit", cal_args.fit_manifest, "fit an energy profile to this reference network");
    cal->add_option("--config", common.config_path, "geometry for --fit");
    cal->add_option("-o,--out", cal_args.out, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*map) return cmd_map(common, model_args);
        if (*run) return cmd_run(common, run_model_args, run_args);
        if (*pow) return cmd_power(common, power_args, csv);
        if (*comp) return cmd_compress(common, comp_args);
        if (*cal) {
            if (cal_args.fit_manifest.empty() && cal_args.points.size() < 2) {
                std::cerr << "calibrate needs --fit or at least two --point values\n";
                return 2;
            }
            return cmd_calibrate(common, cal_args);
        }
    } catch (const Error& e) {
        std::cerr << "lightator: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "lightator: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
