#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace lightator {

// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
    Parse,       // malformed input file or document
    Validation,  // well-formed input that violates a contract
    Capacity,    // request exceeds the fabric
    Domain,      // argument outside an operation's domain
    Mapping,     // inconsistent bank load or unsupported mapping
    Io,          // unreadable or unwritable file
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Mapping: return "mapping";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message,
          std::optional<std::size_t> layer = std::nullopt)
        : std::runtime_error(compose(kind, code, message, layer)),
          kind_(kind), code_(std::move(code)), detail_(message), layer_(layer) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Stable machine-readable tag, e.g. "length_mismatch".
    const std::string& code() const noexcept { return code_; }
    std::optional<std::size_t> layer() const noexcept { return layer_; }
    // The message without the kind/code/layer prefix.
    const std::string& detail() const noexcept { return detail_; }

    // Same error attributed to a layer, unless it already names one.
    Error at_layer(std::size_t layer) const {
        return layer_ ? *this : Error(kind_, code_, detail_, layer);
    }

private:
    static std::string compose(ErrorKind kind, const std::string& code, const std::string& message,
                               std::optional<std::size_t> layer) {
        std::string out = std::string(to_string(kind)) + " error [" + code + "]";
        if (layer) out += " at layer " + std::to_string(*layer);
        out += ": " + message;
        return out;
    }

    ErrorKind kind_;
    std::string code_;
    std::string detail_;
    std::optional<std::size_t> layer_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string code, const std::string& message,
                              std::optional<std::size_t> layer = std::nullopt) {
    throw Error(kind, std::move(code), message, layer);
}

}  // namespace lightator
