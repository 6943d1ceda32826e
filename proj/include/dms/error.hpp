#pragma once

#include <stdexcept>
#include <string>

namespace dms {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    /// Short machine-readable category, e.g. "parse" or "dimension".
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

class TypeError : public Error {
public:
    explicit TypeError(const std::string& message) : Error("type", message) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("argument", message) {}
};

class DatasetError : public Error {
public:
    explicit DatasetError(const std::string& message) : Error("dataset", message) {}
};

/// A model backend failed. Distinct from a successful call that found nothing.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message) : Error("backend", message) {}
};

class IdentityError : public Error {
public:
    explicit IdentityError(const std::string& message) : Error("identity", message) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& message) : Error("metric", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

} // namespace dms
