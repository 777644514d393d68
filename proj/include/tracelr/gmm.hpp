#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tracelr {

// Two-component univariate Gaussian mixture for one distance likelihood.
struct Gmm2 {
    std::array<double, 2> weights{0.5, 0.5};   // sum to 1
    std::array<double, 2> means{0.0, 0.0};
    std::array<double, 2> variances{1.0, 1.0}; // >= floor > 0
    double log_likelihood = 0.0;
    std::size_t n_samples = 0;
};

struct GmmFitReport {
    std::vector<double> loglik_trace; // per EM iteration of the selected restart
    std::vector<double> restart_logliks;
    int chosen_restart = 0;
    int iterations = 0;
};

// EM from `restarts` seeded initializations (means at random distinct sample
// quantiles, variances at the sample variance, weights 1/2). Runs until the
// log-likelihood gain drops below 1e-8 or 500 iterations; keeps the restart
// with the largest final log-likelihood, ties to the smaller index.
Gmm2 fit_gmm2(std::span<const double> samples, int restarts = 3, std::uint64_t seed = 0,
              GmmFitReport* report = nullptr);

double gmm_pdf(const Gmm2& g, double d);
double gmm_log_pdf(const Gmm2& g, double d);

// BIC of 1-, 2- and 3-component fits; reported as a diagnostic only.
std::array<double, 3> gmm_bic_by_components(std::span<const double> samples,
                                            std::uint64_t seed = 0);

} // namespace tracelr
