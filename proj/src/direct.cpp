#include "tracelr/direct.hpp"

#include <cmath>
#include <limits>

#include "tracelr/error.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

DirectModel fit_direct(const std::vector<double>& distances_ss,
                       const std::vector<double>& distances_ds,
                       const DirectFitOptions& options) {
    DirectModel model;
    model.model_ss = fit_gmm2(distances_ss, options.restarts, options.seed);
    model.model_ds = fit_gmm2(distances_ds, options.restarts, options.seed + 1);
    return model;
}

DirectModel fit_direct(const DistanceSet& distances, const PairSet& pairs,
                       const DirectFitOptions& options) {
    if (distances.kind == DistanceKind::vectorial)
        throw Error(ErrorCode::config_error,
                    "direct method requires a scalar distance, got vectorial");
    if (distances.scalar.size() != pairs.pairs.size())
        throw Error(ErrorCode::config_error, "distance/pair set size mismatch");
    std::vector<double> ss;
    std::vector<double> ds;
    ss.reserve(pairs.n_same);
    ds.reserve(pairs.n_diff);
    for (std::size_t k = 0; k < pairs.pairs.size(); ++k) {
        if (pairs.pairs[k].label == PairLabel::same_source)
            ss.push_back(distances.scalar[k]);
        else
            ds.push_back(distances.scalar[k]);
    }
    DirectModel model = fit_direct(ss, ds, options);
    model.distance_kind = distances.kind;
    model.feature_subset = distances.feature_subset;
    return model;
}

double direct_log_lr(const DirectModel& model, double distance) {
    const double log_ss = gmm_log_pdf(model.model_ss, distance);
    const double log_ds = gmm_log_pdf(model.model_ds, distance);
    if (std::isinf(log_ss) && std::isinf(log_ds) && log_ss < 0 && log_ds < 0)
        throw Error(ErrorCode::indeterminate_lr,
                    "both class-conditional densities underflowed at distance " +
                        std::to_string(distance));
    return log_ss - log_ds;
}

LrValue direct_lr(const DirectModel& model, double distance) {
    LrValue lr;
    lr.log_value = direct_log_lr(model, distance);
    const double raw = std::exp(lr.log_value);
    if (raw < kLrSaturationLow) {
        lr.value = kLrSaturationLow;
        lr.saturated_low = true;
    } else if (raw > kLrSaturationHigh) {
        lr.value = kLrSaturationHigh;
        lr.saturated_high = true;
    } else {
        lr.value = raw;
    }
    return lr;
}

double direct_posterior(const DirectModel& model, double distance, double prior_ss) {
    if (!(prior_ss > 0.0 && prior_ss < 1.0))
        throw Error(ErrorCode::config_error, "prior must lie strictly inside (0, 1)");
    const double llr = direct_log_lr(model, distance);
    return sigmoid(llr + std::log(prior_ss / (1.0 - prior_ss)));
}

MonotonicityReport check_lr_monotonicity(const DirectModel& model, double lo, double hi,
                                         std::size_t grid_points) {
    if (!(hi > lo) || grid_points < 2)
        throw Error(ErrorCode::config_error, "monotonicity scan needs hi > lo and >= 2 points");
    MonotonicityReport report;
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    double prev = direct_log_lr(model, lo);
    for (std::size_t g = 1; g < grid_points; ++g) {
        const double d = lo + step * static_cast<double>(g);
        const double cur = direct_log_lr(model, d);
        const double increase = cur - prev;
        if (increase > report.worst_increase) {
            report.worst_increase = increase;
            report.worst_distance = d - step;
            report.monotone_non_increasing = false;
        }
        prev = cur;
    }
    if (!report.monotone_non_increasing)
        report.note = "log LR rises by " + std::to_string(report.worst_increase) +
                      " after distance " + std::to_string(report.worst_distance);
    return report;
}

} // namespace tracelr
