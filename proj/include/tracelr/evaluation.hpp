#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tracelr/direct.hpp"
#include "tracelr/logistic.hpp"
#include "tracelr/pairs.hpp"
#include "tracelr/trace_matrix.hpp"

namespace tracelr {

struct RocPoint {
    double threshold = 0.0;   // classify same-source when score >= threshold
    double sensitivity = 0.0; // fraction of same-source scores at or above it
    double specificity = 0.0; // fraction of different-source scores below it
};

struct RocCurve {
    std::vector<RocPoint> points; // thresholds strictly decreasing, +inf first
    double auc = 0.5;
};

// Mann-Whitney AUC with half credit for ties, plus the full operating-point
// sweep. Thresholds sit at midpoints between consecutive distinct scores with
// +/-inf end points, so every achievable (sensitivity, specificity) appears.
RocCurve roc_auc(std::span<const double> scores_ss, std::span<const double> scores_ds);

struct OperatingPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

// Maximizes sensitivity + specificity - 1; ties go to the point with higher
// specificity (rejecting a true different-source pair is the costlier error).
OperatingPoint youden_best(const RocCurve& roc);

// Subject-level folds: every trace of a subject lands in one fold, fold
// subject-counts differ by at most one. Deterministic per seed.
std::vector<std::vector<std::string>> grouped_kfold(const TraceMatrix& m, int k,
                                                    std::uint64_t seed);

enum class MethodKind : std::uint8_t { direct, indirect_scalar, indirect_vectorial };

const char* method_kind_name(MethodKind kind); // "direct", "indirect-scalar", ...
MethodKind method_kind_from_name(const std::string& name);

struct MethodConfig {
    MethodKind kind = MethodKind::indirect_scalar;
    DistanceKind distance = DistanceKind::spearman; // ignored for indirect_vectorial
    std::vector<std::size_t> feature_subset;        // empty = all features
    double prior_ss = 0.5;                          // equal priors by default
    LogisticOptions logistic;
    DirectFitOptions direct;
    // Cap on different-source pairs entering an indirect fit (0 = keep all);
    // f_ss/f_ds stay at the full-set proportions so the LR correction holds.
    std::size_t subsample_ds = 0;
    std::uint64_t subsample_seed = 0;
    int threads = 0;
};

struct FittedMethod {
    MethodConfig config;
    DirectModel direct;     // populated when config.kind == direct
    LogisticModel logistic; // populated otherwise
    LogisticFitReport logistic_report;
};

FittedMethod fit_method(const TraceMatrix& cal, const MethodConfig& config);

// Posterior same-source probability for every pair, under config.prior_ss.
std::vector<double> score_pairs(const FittedMethod& fitted, const TraceMatrix& m,
                                const PairSet& pairs);

// Splits scores by pair label: first same-source, then different-source.
std::pair<std::vector<double>, std::vector<double>> split_scores(std::span<const double> scores,
                                                                 const PairSet& pairs);

struct EvalReport {
    double auc_pct = 0.0; // all three in [0, 100]
    double sn_pct = 0.0;
    double sp_pct = 0.0;
    double threshold = 0.0; // posterior scale, clamped to [0, 1]
    std::size_t n_ss = 0;
    std::size_t n_ds = 0;
    std::string method;
    std::size_t feature_count = 0;
    std::string dataset;
};

// Fits on the calibration pairs and reports AUC / Youden threshold / Sn / Sp
// on both sides. Calibration and test subject sets must be disjoint.
std::pair<EvalReport, EvalReport> evaluate_method(const TraceMatrix& cal, const TraceMatrix& test,
                                                  const MethodConfig& config);

} // namespace tracelr
