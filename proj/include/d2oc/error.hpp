#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace d2oc {

enum class ErrorCode {
    DimensionMismatch,
    NoRelativeDegree,
    EmptyMap,
    EmptySet,
    DegenerateWeights,
    InfeasibleMarginals,
    NotSPD,
    StaleBeyondHorizon,
    LengthMismatch,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NoRelativeDegree: return "NoRelativeDegree";
        case ErrorCode::EmptyMap: return "EmptyMap";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::DegenerateWeights: return "DegenerateWeights";
        case ErrorCode::InfeasibleMarginals: return "InfeasibleMarginals";
        case ErrorCode::NotSPD: return "NotSPD";
        case ErrorCode::StaleBeyondHorizon: return "StaleBeyondHorizon";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace d2oc
