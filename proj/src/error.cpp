#include "swinhaze/error.hpp"

namespace swinhaze {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidChannels: return "InvalidChannels";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NoSeeds: return "NoSeeds";
        case ErrorCode::IncompleteLabeling: return "IncompleteLabeling";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::NumericalError: return "NumericalError";
        case ErrorCode::TooSmall: return "TooSmall";
        case ErrorCode::PairingError: return "PairingError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
    }
    return "Unknown";
}

}  // namespace swinhaze
