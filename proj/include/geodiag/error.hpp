#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geodiag {

enum class ErrorCode {
    MissingFile,
    BadMeta,
    TruncatedFeatures,
    TruncatedLabels,
    TruncatedLogits,
    SizeMismatch,
    NonFinite,
    LabelOutOfRange,
    MissingClass,
    Io,
    InvalidArgument,
    ClassTooSmall,
    NotOrthogonalizable,
    EigenFailure,
    TooFewConverged,
    AnchorsNotStored,
    LpFailure,
    NotSeparable,
    NoCrossing,
    Divergence,
    DimensionMismatch,
    ConstantSeries,
    MissingMarker,
    MissingStderr,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingFile: return "missing file";
    case ErrorCode::BadMeta: return "bad meta";
    case ErrorCode::TruncatedFeatures: return "truncated features";
    case ErrorCode::TruncatedLabels: return "truncated labels";
    case ErrorCode::TruncatedLogits: return "truncated logits";
    case ErrorCode::SizeMismatch: return "size mismatch";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::LabelOutOfRange: return "label out of range";
    case ErrorCode::MissingClass: return "missing class";
    case ErrorCode::Io: return "i/o failure";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::ClassTooSmall: return "class too small";
    case ErrorCode::NotOrthogonalizable: return "not orthogonalizable";
    case ErrorCode::EigenFailure: return "eigen-solve failure";
    case ErrorCode::TooFewConverged: return "too few converged samples";
    case ErrorCode::AnchorsNotStored: return "anchors not stored";
    case ErrorCode::LpFailure: return "lp failure";
    case ErrorCode::NotSeparable: return "not separable";
    case ErrorCode::NoCrossing: return "no crossing";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::ConstantSeries: return "constant series";
    case ErrorCode::MissingMarker: return "missing marker";
    case ErrorCode::MissingStderr: return "missing stderr";
    }
    return "unknown";
}

// All library failures are reported through this type; `code()` is stable,
// the message carries detail for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& detail) {
    if (!cond) throw Error(code, detail);
}

} // namespace geodiag
