#pragma once

#include <stdexcept>
#include <string>

namespace mpl {

enum class ErrorCode {
    InvalidArgument = 1,
    Io,
    Parse,
    Shape,
    EmptyBatch,
    InsufficientFlock,
    InvalidEndpoint,
    Unreachable,
    InvalidInstruction,
    PortInUse,
    Runtime,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mpl
