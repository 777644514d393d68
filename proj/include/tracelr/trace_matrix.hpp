#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tracelr {

enum class Gender : std::uint8_t { male, female, unknown };

enum class Mode : std::uint8_t { raw, normalized_log, dichotomized };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);
const char* gender_name(Gender gender);

struct TraceInfo {
    std::string subject_id;
    std::string replicate_id;
    Gender gender = Gender::unknown;
    std::optional<unsigned> age;
};

// A panel of traces: per-trace metadata plus a row-major feature block.
// Immutable after construction; the constructor enforces the mode invariants
// (raw/dichotomized entries finite and >= 0, dichotomized entries in {0,1},
// normalized rows summing to 1 within 1e-9, unique (subject, replicate)).
class TraceMatrix {
public:
    TraceMatrix(std::vector<TraceInfo> info, std::vector<double> data, std::size_t n_features,
                Mode mode, std::vector<std::string> feature_names = {});

    std::size_t size() const { return info_.size(); }
    std::size_t n_features() const { return n_features_; }
    Mode mode() const { return mode_; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * n_features_, n_features_};
    }
    const TraceInfo& info(std::size_t i) const { return info_[i]; }
    const std::vector<TraceInfo>& traces() const { return info_; }
    const std::vector<double>& data() const { return data_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    // Subjects in first-appearance order with the trace indices of each.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> subjects() const;

    // New matrix holding the given trace rows (metadata and mode preserved).
    TraceMatrix select_traces(std::span<const std::size_t> indices) const;

    // 64-bit digest of (N, n, mode, ids, feature bits); identifies the exact
    // panel a PairSet was built from.
    std::uint64_t fingerprint() const;

private:
    std::vector<TraceInfo> info_;
    std::vector<double> data_;
    std::size_t n_features_;
    std::vector<std::string> feature_names_;
    Mode mode_;
};

struct CsvSchema {
    std::string subject_column = "subject_id";
    std::string replicate_column = "replicate_id";
    std::string gender_column = "gender";
    std::string age_column = "age";
};

// CSV I/O. Lines starting with '#' are comments; a "#mode: <name>" comment
// restores the mode. All remaining header columns are features, in order.
TraceMatrix ingest_csv(const std::string& path, const CsvSchema& schema = {});
TraceMatrix parse_csv(const std::string& text, const CsvSchema& schema = {},
                      const std::string& origin = "<string>");

// Values are written in shortest round-trip form, so ingest(emit(m)) == m
// bit-exactly. Extra comment lines (e.g. a manifest reference) are emitted
// verbatim after the mode line.
void emit_csv(const TraceMatrix& m, const std::string& path,
              const std::vector<std::string>& extra_comments = {});
std::string format_csv(const TraceMatrix& m, const std::vector<std::string>& extra_comments = {});

// Per trace: t_k = ln(1 + a_k), x_k = t_k / sum_j t_j.
TraceMatrix normalize_log(const TraceMatrix& m);

// Entry = 1 iff raw area > threshold. Accepts raw or (trivially) already
// dichotomized input.
TraceMatrix dichotomize(const TraceMatrix& m, double threshold = 0.0);

struct SplitConfig {
    double calibration_fraction = 0.5; // in (0, 1)
    bool stratify_gender = false;
    std::uint64_t seed = 0;
};

// Subject-level split: every trace of a subject lands on one side. With
// stratification the per-gender calibration counts stay within 1 of
// fraction * count. Deterministic per seed.
std::pair<TraceMatrix, TraceMatrix> split_calibration_test(const TraceMatrix& m,
                                                           const SplitConfig& cfg);

struct RepeatabilityReport {
    std::vector<double> per_feature_rsd; // NaN where no subject qualifies
    double median_rsd = 0.0;
    double iqi_low = 0.0;
    double iqi_high = 0.0;

    // "33.2 [17.9 ; 48.8]"
    std::string format() const;
};

// Per feature: RSD = 100*sd/mean per subject (>= 2 replicates, mean > 0),
// median over subjects; the report summarizes the per-feature medians.
RepeatabilityReport repeatability(const TraceMatrix& m);

} // namespace tracelr
