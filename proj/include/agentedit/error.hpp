#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentedit {

// Every failure surfaced by the library maps onto one of these codes. The CLI
// prints error_name() so scripts can branch on the failure kind.
enum class ErrorCode {
    // plan_schema
    MissingField,
    MalformedDocument,
    EmptyStringField,
    InvalidRequest,
    // tool_exec
    NetworkError,
    NoCandidates,
    UnparseableSelection,
    IndexOutOfRange,
    NoTargetFound,
    DimensionMismatch,
    PlanInvalid,
    // conditioning_math
    TimestepOutOfRange,
    WidthMismatch,
    // training_objectives
    EmptySequence,
    NonFiniteInput,
    InvalidConfig,
    // dataset_builder
    CategoryInputMissing,
    DegenerateRejection,
    InvalidPerturbation,
    MissingRewrite,
    // bench_harness
    TooFewFrames,
    MissingEntityFields,
    MissingAxis,
    ScoreOutOfRange,
    TotalMismatch,
    UnparseableLine,
    VariantMismatch,
    WrongCardinality,
    EmptyInput,
    UnknownBenchmark,
    JudgeFailed,
    // app_runtime
    RoleUnbound,
    ConfigMissing,
    UnknownSubcommand,
    IoError,
};

constexpr std::string_view error_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::EmptyStringField: return "EmptyStringField";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::UnparseableSelection: return "UnparseableSelection";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NoTargetFound: return "NoTargetFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PlanInvalid: return "PlanInvalid";
    case ErrorCode::TimestepOutOfRange: return "TimestepOutOfRange";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CategoryInputMissing: return "CategoryInputMissing";
    case ErrorCode::DegenerateRejection: return "DegenerateRejection";
    case ErrorCode::InvalidPerturbation: return "InvalidPerturbation";
    case ErrorCode::MissingRewrite: return "MissingRewrite";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::MissingEntityFields: return "MissingEntityFields";
    case ErrorCode::MissingAxis: return "MissingAxis";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::TotalMismatch: return "TotalMismatch";
    case ErrorCode::UnparseableLine: return "UnparseableLine";
    case ErrorCode::VariantMismatch: return "VariantMismatch";
    case ErrorCode::WrongCardinality: return "WrongCardinality";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownBenchmark: return "UnknownBenchmark";
    case ErrorCode::JudgeFailed: return "JudgeFailed";
    case ErrorCode::RoleUnbound: return "RoleUnbound";
    case ErrorCode::ConfigMissing: return "ConfigMissing";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code), message_(message)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const noexcept { return error_name(code_); }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

// Transport failure after the retry budget is spent.
class NetworkError : public Error {
public:
    NetworkError(const std::string& message, int attempts)
        : Error(ErrorCode::NetworkError, message + " (attempts=" + std::to_string(attempts) + ")"),
          attempts_(attempts)
    {
    }

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace agentedit
