#include "granur/error.hpp"

namespace granur {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Config: return "ConfigError";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::EmptyDocument: return "EmptyDocument";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::NoCandidates: return "NoCandidates";
        case ErrorCode::EmptyMatrix: return "EmptyMatrix";
        case ErrorCode::InconsistentPyramid: return "InconsistentPyramid";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

int exit_code(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Config:
        case ErrorCode::InvalidArgument:
            return 2;
        case ErrorCode::Io:
            return 3;
        case ErrorCode::RemoteUnavailable:
            return 4;
        default:
            return 5;
    }
}

}  // namespace granur
