#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tracelr/evaluation.hpp"
#include "tracelr/pairs.hpp"
#include "tracelr/trace_matrix.hpp"

namespace tracelr {

enum class FeatureTestKind : std::uint8_t { wilcoxon, fisher };

const char* feature_test_kind_name(FeatureTestKind kind);

struct FeatureRanking {
    std::vector<std::size_t> order; // most discriminative first; p ties by index
    std::vector<double> p_values;   // indexed by feature, not by rank
    FeatureTestKind test_kind = FeatureTestKind::wilcoxon;
};

// Per feature, compares |x_i - x_j| between same-source and different-source
// pairs: rank-sum test for continuous panels, one-sided exact test on the
// 2x2 (label x differs) table for dichotomized ones. Raw panels must be
// normalized or dichotomized first.
FeatureRanking rank_features(const TraceMatrix& m, const PairSet& pairs, int threads = 0);

struct SelectionResult {
    struct CountStats {
        double mean_auc = 0.0; // NaN when any fold failed at this count
        double sd_auc = 0.0;   // over folds, sample sd
        std::vector<double> fold_auc;
    };

    std::size_t best_count = 0;
    std::vector<std::size_t> grid; // sorted, deduplicated
    std::map<std::size_t, CountStats> cv_auc_by_count;
    FeatureRanking full_ranking; // on the whole calibration set
};

// Grouped k-fold selection of the feature count: the ranking is recomputed on
// each fold's training subjects (no leakage), the method refits per count, and
// best_count maximizes the mean held-out AUC (smallest count on ties). Counts
// whose fit fails on some fold get mean NaN and drop out of the argmax.
SelectionResult select_count_cv(const TraceMatrix& cal, const MethodConfig& method,
                                const std::vector<std::size_t>& grid, int k = 3,
                                std::uint64_t seed = 0);

// Default candidate grid, clipped to the panel's feature count.
std::vector<std::size_t> default_count_grid(std::size_t n_features);

} // namespace tracelr
