#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lfgam {

enum class ErrorKind {
    DegenerateData,
    Extrapolation,
    Identifiability,
    Dimension,
    Validation,
    Syntax,
    Resolution,
    Fit,
    Input,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DegenerateData: return "degenerate-data";
    case ErrorKind::Extrapolation: return "extrapolation";
    case ErrorKind::Identifiability: return "identifiability";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Fit: return "fit";
    case ErrorKind::Input: return "input";
    }
    return "unknown";
}

/// Base of every error thrown by the engine. The kind survives stage
/// relabelling so front ends can map failures to exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class SyntaxError : public Error {
public:
    SyntaxError(const std::string& message, std::size_t offset, std::vector<std::string> expected)
        : Error(ErrorKind::Syntax, format(message, offset, expected)),
          offset_(offset),
          expected_(std::move(expected)) {}

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    static std::string format(const std::string& message, std::size_t offset,
                              const std::vector<std::string>& expected) {
        std::string out = "syntax error at offset " + std::to_string(offset) + ": " + message;
        if (!expected.empty()) {
            out += " (expected one of:";
            for (const auto& e : expected) out += " " + e;
            out += ")";
        }
        return out;
    }

    std::size_t offset_;
    std::vector<std::string> expected_;
};

/// Re-throws `e` with a stage label prefixed, keeping its kind.
[[noreturn]] inline void rethrow_with_stage(const std::string& stage, const Error& e) {
    throw Error(e.kind(), "[" + stage + "] " + e.what());
}

} // namespace lfgam
