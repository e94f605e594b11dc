#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace granur {

enum class ErrorCode {
    Config,
    Io,
    MalformedFile,
    RemoteUnavailable,
    DimMismatch,
    EmptyText,
    EmptyDocument,
    EmptyCorpus,
    OutOfRange,
    DomainError,
    NoCandidates,
    EmptyMatrix,
    InconsistentPyramid,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

// Process exit status for the CLI: 2 config, 3 IO, 4 remote embedder, 5 data.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace granur
