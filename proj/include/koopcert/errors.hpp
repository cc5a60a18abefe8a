#pragma once

#include <stdexcept>
#include <string>

namespace koopcert {

// Error categories. `Config` and `Data` map to CLI exit codes 2 and 3,
// everything numerical maps to 4.
enum class ErrorCode {
    NonFinite,
    DimensionMismatch,
    DomainError,
    DegenerateData,
    InvalidArgument,
    ZeroVector,
    ZeroSubspace,
    EmptySubspace,
    SpaceMismatch,
    InsufficientData,
    SingularSample,
    AllEvaluationsFailed,
    SchemaError,
    ConfigError,
    DataError,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace koopcert
