#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitwiper {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDimension : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct LabelError : Error { using Error::Error; };
struct TraceError : Error { using Error::Error; };
struct FrozenError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct PartitionError : Error { using Error::Error; };
struct SelectorError : Error { using Error::Error; };
struct RoutingError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ReportError : Error { using Error::Error; };
struct DesignError : Error { using Error::Error; };

// Carries the 1-based physical line number of the offending row.
struct ParseError : Error {
    std::size_t row;
    ParseError(const std::string& msg, std::size_t row_)
        : Error(msg + " (row " + std::to_string(row_) + ")"), row(row_) {}
};

}  // namespace splitwiper
