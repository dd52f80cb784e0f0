#pragma once

// Binary PGM (P5) / PPM (P6) ingestion and the sensor readout model.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lightator/error.hpp"
#include "lightator/netir.hpp"
#include "lightator/photonics.hpp"
#include "lightator/quant.hpp"

namespace lightator::image {

// Reference voltages of the comparator ladder.
struct CrcRange {
    double v_lo = 0.0;
    double v_hi = 1.0;
};

// Pixel voltage for an 8-bit value: centre of the value's bin on [v_lo, v_hi].
inline double pixel_voltage(std::uint8_t v, const CrcRange& range) {
    return range.v_lo + (static_cast<double>(v) + 0.5) / 256.0 * (range.v_hi - range.v_lo);
}

inline std::uint8_t pixel_code(std::uint8_t v, const CrcRange& range = {}) {
    return static_cast<std::uint8_t>(photonics::crc_quantize(pixel_voltage(v, range), range.v_lo, range.v_hi));
}

// A sensor frame: 4-bit codes in CHW order plus the 8-bit source samples.
struct Frame {
    netir::Dims dims;
    std::vector<std::uint8_t> codes;
    std::vector<std::uint8_t> source;
    double act_scale = 1.0 / quant::kActMax;

    std::uint8_t at(std::size_t c, std::size_t y, std::size_t x) const {
        return codes[(c * dims.h + y) * dims.w + x];
    }
};

// source is CHW 8-bit samples.
inline Frame make_frame(const netir::Dims& dims, std::vector<std::uint8_t> source, const CrcRange& range = {}) {
    if (source.size() != dims.size())
        fail(ErrorKind::Validation, "frame_size",
             "frame " + dims.str() + " needs " + std::to_string(dims.size()) + " samples, got " +
                 std::to_string(source.size()));
    Frame f;
    f.dims = dims;
    f.codes.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) f.codes[i] = pixel_code(source[i], range);
    f.source = std::move(source);
    return f;
}

// Frame built directly from 4-bit codes (no 8-bit source: source = 17 * code).
inline Frame frame_from_codes(const netir::Dims& dims, std::vector<std::uint8_t> codes) {
    if (codes.size() != dims.size())
        fail(ErrorKind::Validation, "frame_size", "code count does not match " + dims.str());
    Frame f;
    f.dims = dims;
    f.source.resize(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] > quant::kActMax)
            fail(ErrorKind::Validation, "code_range", "code " + std::to_string(codes[i]) + " exceeds 15");
        f.source[i] = static_cast<std::uint8_t>(codes[i] * 17);
    }
    f.codes = std::move(codes);
    return f;
}

namespace detail {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t next_int(const char* what) {
        skip_space_and_comments();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (++digits > 9) fail(ErrorKind::Parse, "bad_header", std::string(what) + " too large");
        }
        if (digits == 0) fail(ErrorKind::Parse, "bad_header", std::string("missing ") + what);
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t payload_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            fail(ErrorKind::Parse, "bad_header", "missing whitespace after maxval");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

}  // namespace detail

// Parses an in-memory P5/P6 image into a frame.
inline Frame parse_pnm(std::span<const std::uint8_t> bytes, const CrcRange& range = {}) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        fail(ErrorKind::Parse, "bad_magic", "expected binary PGM (P5) or PPM (P6)");
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    detail::HeaderReader header(bytes);
    const std::size_t w = header.next_int("width");
    const std::size_t h = header.next_int("height");
    const std::size_t maxval = header.next_int("maxval");
    if (maxval != 255)
        fail(ErrorKind::Parse, "bad_maxval", "maxval " + std::to_string(maxval) + " is not 255");
    if (w == 0 || h == 0) fail(ErrorKind::Parse, "bad_header", "image has zero width or height");
    const std::size_t start = header.payload_start();
    const std::size_t need = w * h * channels;
    if (bytes.size() < start + need)
        fail(ErrorKind::Parse, "truncated_payload",
             "expected " + std::to_string(need) + " raster bytes, found " +
                 std::to_string(bytes.size() - std::min(bytes.size(), start)));
    std::vector<std::uint8_t> chw(need);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                chw[(c * h + y) * w + x] = bytes[start + (y * w + x) * channels + c];
    return make_frame({h, w, channels}, std::move(chw), range);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "missing_file", "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Frame load_image(const std::filesystem::path& path, const CrcRange& range = {}) {
    const auto bytes = read_file(path);
    return parse_pnm(bytes, range);
}

// Serializes CHW 8-bit samples (1 or 3 channels) as P5/P6.
inline std::vector<std::uint8_t> encode_pnm(const netir::Dims& dims, std::span<const std::uint8_t> chw) {
    if (dims.c != 1 && dims.c != 3)
        fail(ErrorKind::Validation, "pnm_channels", "PNM output needs 1 or 3 channels");
    if (chw.size() != dims.size()) fail(ErrorKind::Validation, "frame_size", "sample count does not match dims");
    const std::string header = std::string(dims.c == 3 ? "P6" : "P5") + "\n" + std::to_string(dims.w) +
                               " " + std::to_string(dims.h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (std::size_t y = 0; y < dims.h; ++y)
        for (std::size_t x = 0; x < dims.w; ++x)
            for (std::size_t c = 0; c < dims.c; ++c) out.push_back(chw[(c * dims.h + y) * dims.w + x]);
    return out;
}

inline void write_pnm(const std::filesystem::path& path, const netir::Dims& dims,
                      std::span<const std::uint8_t> chw) {
    const auto bytes = encode_pnm(dims, chw);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "write_failed", "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Single-channel plane to 8 bits: code c -> 17 c.
inline std::vector<std::uint8_t> codes_to_gray(std::span<const std::int32_t> codes) {
    std::vector<std::uint8_t> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::clamp(codes[i], 0, quant::kActMax) * 17);
    return out;
}

}  // namespace lightator::image
