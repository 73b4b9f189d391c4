#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtl {

enum class ErrorKind {
    ConstantColumn,
    SchemaMismatch,
    NonNumericCell,
    TooFewSamples,
    SingleClass,
    DegenerateK,
    EmptyGraph,
    SingularSystem,
    Separation,
    DimensionMismatch,
    ZeroVariance,
    ConfigInvalid,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::DegenerateK: return "DegenerateK";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::Separation: return "Separation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

} // namespace mtl
