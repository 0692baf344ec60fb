#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semtext {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    ZeroVector,
    EmptyInput,
    ProviderUnavailable,
    DimensionDrift,
    CacheCorrupt,
    EmptyCorpus,
    DuplicateId,
    NotFound,
    CorruptFile,
    VersionUnsupported,
    ScorerUnavailable,
    OutOfRange,
    KTooLarge,
    DegenerateRow,
    IoFailure,
    ModelMismatch,
    TemplateInvalid,
    LlmUnavailable,
    Busy,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::DimensionDrift: return "DimensionDrift";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::DegenerateRow: return "DegenerateRow";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::TemplateInvalid: return "TemplateInvalid";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::Busy: return "Busy";
    }
    return "Unknown";
}

/// Every failure raised by semtext carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace semtext
