#pragma once

#include <stdexcept>
#include <string>

namespace guardforge {

enum class ErrorKind {
    InvalidArgument,
    UnrecognizedLabel,
    MissingGold,
    AbsentGold,
    NotARejection,
    NotAmbiguous,
    InvalidCounts,
    UnvalidatedRecord,
    EmptyInput,
    EmptyCorpus,
    NoPositives,
    SchemaMismatch,
    Io,
    EndpointUnavailable,
    AuthFailure,
    Timeout,
    UnknownSampleId,
    ValidationFailed,
};

const char* error_kind_name(ErrorKind kind);

/// All recoverable failures in the library are thrown as Error. The kind
/// drives the C API status code and the CLI exit code (validation vs I/O).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    /// True for failures caused by bad inputs rather than the environment.
    bool is_validation() const;

private:
    ErrorKind kind_;
};

} // namespace guardforge
