#include "guardforge/error.hpp"

namespace guardforge {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::UnrecognizedLabel: return "UnrecognizedLabel";
        case ErrorKind::MissingGold: return "MissingGold";
        case ErrorKind::AbsentGold: return "AbsentGold";
        case ErrorKind::NotARejection: return "NotARejection";
        case ErrorKind::NotAmbiguous: return "NotAmbiguous";
        case ErrorKind::InvalidCounts: return "InvalidCounts";
        case ErrorKind::UnvalidatedRecord: return "UnvalidatedRecord";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::EmptyCorpus: return "EmptyCorpus";
        case ErrorKind::NoPositives: return "NoPositives";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::Io: return "Io";
        case ErrorKind::EndpointUnavailable: return "EndpointUnavailable";
        case ErrorKind::AuthFailure: return "AuthFailure";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::UnknownSampleId: return "UnknownSampleId";
        case ErrorKind::ValidationFailed: return "ValidationFailed";
    }
    return "Unknown";
}

bool Error::is_validation() const {
    switch (kind_) {
        case ErrorKind::Io:
        case ErrorKind::EndpointUnavailable:
        case ErrorKind::AuthFailure:
        case ErrorKind::Timeout:
        case ErrorKind::UnknownSampleId:
            return false;
        default:
            return true;
    }
}

} // namespace guardforge
