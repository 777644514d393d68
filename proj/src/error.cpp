#include "tracelr/error.hpp"

namespace tracelr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::schema_error: return "schema error";
        case ErrorCode::parse_error: return "parse error";
        case ErrorCode::duplicate_trace: return "duplicate trace";
        case ErrorCode::normalization_error: return "normalization error";
        case ErrorCode::split_error: return "split error";
        case ErrorCode::diagnostic_error: return "diagnostic error";
        case ErrorCode::pairing_error: return "pairing error";
        case ErrorCode::dimension_mismatch: return "dimension mismatch";
        case ErrorCode::undefined_correlation: return "undefined correlation";
        case ErrorCode::stale_pairset: return "stale pair set";
        case ErrorCode::fit_error: return "fit error";
        case ErrorCode::degenerate_fit: return "degenerate fit";
        case ErrorCode::indeterminate_lr: return "indeterminate likelihood ratio";
        case ErrorCode::test_error: return "test error";
        case ErrorCode::cv_error: return "cross-validation error";
        case ErrorCode::evaluation_error: return "evaluation error";
        case ErrorCode::leakage_error: return "leakage error";
        case ErrorCode::config_error: return "configuration error";
        case ErrorCode::io_error: return "I/O error";
        case ErrorCode::version_error: return "version error";
    }
    return "error";
}

} // namespace tracelr
