#pragma once

#include <stdexcept>
#include <string>

namespace tracelr {

enum class ErrorCode {
    schema_error,          // missing/unknown columns, empty file, bad header
    parse_error,           // non-numeric or negative value, malformed line
    duplicate_trace,       // repeated (subject_id, replicate_id)
    normalization_error,   // all-zero trace under log normalization
    split_error,           // fewer than 2 subjects, bad fraction
    diagnostic_error,      // no subject with >= 2 replicates
    pairing_error,         // fewer than 2 traces
    dimension_mismatch,    // vectors of unequal length
    undefined_correlation, // constant vector under Pearson/Spearman
    stale_pairset,         // pair set fingerprint does not match the matrix
    fit_error,             // too few samples / zero spread / single class
    degenerate_fit,        // every EM restart collapsed
    indeterminate_lr,      // both densities underflow
    test_error,            // empty sample in a rank test
    cv_error,              // more folds than subjects, empty grid
    evaluation_error,      // empty score list
    leakage_error,         // calibration/test subject overlap
    config_error,          // inconsistent synthesis or method configuration
    io_error,              // unreadable/unwritable path
    version_error,         // model schema version mismatch
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace tracelr
