#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clt {

enum class ErrorCode {
    UnknownFamily,
    GridTooNarrow,
    NonPositiveParameter,
    InvalidGrid,
    ZeroMass,
    StepMismatch,
    GridOverflow,
    NonPositiveAlpha,
    NegativeTime,
    NotNormalized,
    NonSmoothInput,
    IndexOutOfRange,
    DegenerateRow,
    GridMismatch,
    ConstantFunction,
    NoConvergence,
    VarianceNotUnit,
    TailNotConverged,
    TooFewSamples,
    BandwidthNonPositive,
    ClampedMassTooLarge,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the numerical core carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace clt
