#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tracelr/distance.hpp"
#include "tracelr/gmm.hpp"
#include "tracelr/lr_value.hpp"

namespace tracelr {

// Direct likelihood-ratio method: fit one two-component Gaussian mixture to the
// same-source distances and one to the different-source distances, then score a
// new distance as the density ratio.
struct DirectModel {
    DistanceKind distance_kind = DistanceKind::euclidean;
    std::vector<std::size_t> feature_subset; // empty = all features
    Gmm2 model_ss;
    Gmm2 model_ds;
};

struct DirectFitOptions {
    int restarts = 3;
    unsigned long long seed = 0;
};

// Fits both class-conditional mixtures from labelled scalar distances.
DirectModel fit_direct(const std::vector<double>& distances_ss,
                       const std::vector<double>& distances_ds,
                       const DirectFitOptions& options = {});

// Convenience: split a scalar DistanceSet by pair label and fit.
DirectModel fit_direct(const DistanceSet& distances, const PairSet& pairs,
                       const DirectFitOptions& options = {});

// Density ratio f(d | same source) / f(d | different source), clamped to
// [1e-300, 1e300] with saturation flags. Both densities underflowing to zero
// makes the ratio meaningless and raises ErrorCode::indeterminate_lr.
LrValue direct_lr(const DirectModel& model, double distance);

// log LR without forming the ratio; used internally and by evaluation scores.
double direct_log_lr(const DirectModel& model, double distance);

// Posterior probability of same source under the given prior:
// sigmoid(log LR + logit(prior)). Prior must lie strictly inside (0, 1).
double direct_posterior(const DirectModel& model, double distance, double prior_ss);

// Diagnostic: scans the distance axis over [lo, hi] and reports whether the log
// LR is non-increasing (larger distance never argues harder for same source).
// Returns the first offending distance if not, as a human-readable note.
struct MonotonicityReport {
    bool monotone_non_increasing = true;
    double worst_distance = 0.0; // where the largest increase starts
    double worst_increase = 0.0; // in log LR, over one grid step
    std::string note;
};

MonotonicityReport check_lr_monotonicity(const DirectModel& model, double lo, double hi,
                                         std::size_t grid_points = 512);

} // namespace tracelr
