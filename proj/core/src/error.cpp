#include "microtrip/error.hpp"

namespace microtrip {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::DegenerateInput: return "E_DEGENERATE_INPUT";
    case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Checksum: return "E_CHECKSUM";
    case ErrorCode::Version: return "E_VERSION";
    case ErrorCode::NotFound: return "E_NOT_FOUND";
    case ErrorCode::CheckpointNotFound: return "E_CHECKPOINT_NOT_FOUND";
    case ErrorCode::Infeasible: return "E_INFEASIBLE";
    case ErrorCode::Numerical: return "E_NUMERICAL";
    case ErrorCode::DigestMismatch: return "E_DIGEST_MISMATCH";
    case ErrorCode::Config: return "E_CONFIG";
    }
    return "E_UNKNOWN";
}

} // namespace microtrip
