#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace primhand {

/// Base class for all library errors. `kind()` is a stable machine-readable
/// tag used by the CLI when emitting error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Invalid values fed to an operation (non-finite input, bad parameter).
struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

/// Malformed input file; message names the offending row/column when known.
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error("parse", m) {}
};

/// Dimension mismatch between containers that must agree.
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

/// Geometric construction is singular (coplanar contact points etc.).
struct DegenerateError : Error {
    explicit DegenerateError(const std::string& m) : Error("degenerate", m) {}
};

/// Inconsistent or incomplete run configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

/// Filesystem failure (missing input, unwritable output).
struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace primhand
