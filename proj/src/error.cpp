#include "clt/error.hpp"

namespace clt {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownFamily: return "UnknownFamily";
        case ErrorCode::GridTooNarrow: return "GridTooNarrow";
        case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::ZeroMass: return "ZeroMass";
        case ErrorCode::StepMismatch: return "StepMismatch";
        case ErrorCode::GridOverflow: return "GridOverflow";
        case ErrorCode::NonPositiveAlpha: return "NonPositiveAlpha";
        case ErrorCode::NegativeTime: return "NegativeTime";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::NonSmoothInput: return "NonSmoothInput";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::DegenerateRow: return "DegenerateRow";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::ConstantFunction: return "ConstantFunction";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::VarianceNotUnit: return "VarianceNotUnit";
        case ErrorCode::TailNotConverged: return "TailNotConverged";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::BandwidthNonPositive: return "BandwidthNonPositive";
        case ErrorCode::ClampedMassTooLarge: return "ClampedMassTooLarge";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace clt
