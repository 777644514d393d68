#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tracelr/distance.hpp"
#include "tracelr/lr_value.hpp"

namespace tracelr {

enum class LogisticMode : std::uint8_t { scalar, vectorial };

const char* logistic_mode_name(LogisticMode mode);
LogisticMode logistic_mode_from_name(const std::string& name);

// Logistic discriminator between same-source and different-source distance
// populations: p(same | d) = sigmoid(a.d + b) on the calibration mixing
// proportions f_ss / f_ds.
struct LogisticModel {
    LogisticMode mode = LogisticMode::scalar;
    std::vector<double> a; // one coefficient per distance feature
    double b = 0.0;
    double f_ss = 0.5; // proportion of same-source samples in the fit
    double f_ds = 0.5; // = 1 - f_ss
    double ridge = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct LogisticOptions {
    double ridge = 0.0; // L2 penalty on a, never on b
    int max_iter = 100;
    double tol = 1e-8; // max-abs gradient at which the fit is declared converged
    int threads = 0;
    // When different-source samples were subsampled before the fit, supply the
    // full-population same-source proportion here so the posterior and LR
    // corrections stay valid for the full population.
    std::optional<double> f_ss_override;
};

struct LogisticFitReport {
    std::vector<double> objective_trace; // penalized log-likelihood per accepted step
    double gradient_norm = 0.0;          // max-abs at exit
    double coefficient_norm = 0.0;       // max-abs at exit
    int hessian_fallbacks = 0;           // iterations that had to use the gradient direction
    std::string note;                    // non-empty when converged is false
};

// Newton / reweighted-least-squares maximum likelihood, streamed over the
// design in fixed batches so vectorial fits never materialize the full
// pair-by-feature matrix. Labels: 1 = same source, aligned with design rows.
// Bit-identical results for any thread count. Complete separation (an iterate
// classifies every sample strictly correctly, so the unpenalized optimum is
// unbounded) is reported as converged=false with an explanatory note.
LogisticModel fit_logistic(const DesignSource& design, std::span<const std::uint8_t> labels,
                           const LogisticOptions& options = {},
                           LogisticFitReport* report = nullptr);

// Small-instance overload: rows of distance features (no intercept column),
// each with a 0/1 label.
LogisticModel fit_logistic(const std::vector<std::pair<std::vector<double>, int>>& design,
                           const LogisticOptions& options = {},
                           LogisticFitReport* report = nullptr);

// sigmoid(a.d + b); d must carry exactly one value per coefficient.
double logistic_output(const LogisticModel& model, std::span<const double> d);

// Posterior probability of same source under an arbitrary prior; reduces
// bit-exactly to logistic_output when prior_ss equals f_ss.
double indirect_posterior(const LogisticModel& model, std::span<const double> d, double prior_ss);

// Same correction applied to an already-computed score a.d + b.
double indirect_posterior_from_score(const LogisticModel& model, double score, double prior_ss);

// exp(a.d + b) * f_ds / f_ss, formed in log-space and clamped to
// [1e-300, 1e300] with saturation flags.
LrValue indirect_lr(const LogisticModel& model, std::span<const double> d);

double indirect_log_lr(const LogisticModel& model, std::span<const double> d);

} // namespace tracelr
