#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swinhaze {

enum class ErrorCode {
    NotFound,
    UnsupportedFormat,
    IoError,
    InvalidChannels,
    InvalidParameter,
    ShapeMismatch,
    NoSeeds,
    IncompleteLabeling,
    ConfigError,
    NumericalError,
    TooSmall,
    PairingError,
    EmptyDataset,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one machine-readable category.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace swinhaze
