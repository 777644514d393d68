#include "tracelr/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tracelr/error.hpp"
#include "tracelr/rng.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kMaxIterations = 500;
constexpr double kLoglikTol = 1e-8;

double log_normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

struct Component {
    double weight, mean, variance;
};

struct EmResult {
    std::vector<Component> components;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> loglik_trace;
    bool degenerate = false;
};

// Plain EM for k univariate components. The variance floor (1e-6 x sample
// variance) keeps components from collapsing onto a single point.
EmResult run_em(std::span<const double> samples, std::vector<Component> init,
                double variance_floor) {
    const std::size_t n = samples.size();
    const std::size_t k = init.size();
    EmResult result;
    result.components = std::move(init);

    std::vector<double> resp(n * k);
    double prev_loglik = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // E-step in log space.
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double max_term = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const auto& comp = result.components[c];
                const double term = comp.weight > 0.0
                                        ? std::log(comp.weight) +
                                              log_normal_pdf(samples[i], comp.mean, comp.variance)
                                        : -std::numeric_limits<double>::infinity();
                resp[i * k + c] = term;
                max_term = std::max(max_term, term);
            }
            double total = 0.0;
            for (std::size_t c = 0; c < k; ++c) total += std::exp(resp[i * k + c] - max_term);
            const double log_total = max_term + std::log(total);
            loglik += log_total;
            for (std::size_t c = 0; c < k; ++c) {
                resp[i * k + c] = std::exp(resp[i * k + c] - log_total);
            }
        }
        result.loglik_trace.push_back(loglik);
        if (!std::isfinite(loglik)) {
            result.degenerate = true;
            return result;
        }
        result.log_likelihood = loglik;
        if (loglik - prev_loglik < kLoglikTol && iter > 0) break;
        prev_loglik = loglik;

        // M-step.
        for (std::size_t c = 0; c < k; ++c) {
            double nc = 0.0, sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nc += resp[i * k + c];
                sum += resp[i * k + c] * samples[i];
            }
            if (nc < 1e-10) {
                result.degenerate = true;
                return result;
            }
            const double mu = sum / nc;
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = samples[i] - mu;
                ss += resp[i * k + c] * d * d;
            }
            result.components[c] = {nc / static_cast<double>(n), mu,
                                    std::max(ss / nc, variance_floor)};
        }
    }
    return result;
}

double sample_quantile(const std::vector<double>& sorted, double p) {
    const double idx = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (idx - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EmResult fit_k(std::span<const double> samples, std::size_t k, int restarts, std::uint64_t seed,
               GmmFitReport* report) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double spread = sorted.back() - sorted.front();
    if (spread <= 0.0) {
        throw Error(ErrorCode::fit_error, "samples have zero spread");
    }

    double variance = 0.0;
    const double mu = mean(samples);
    for (double x : samples) variance += (x - mu) * (x - mu);
    variance /= static_cast<double>(samples.size());
    variance = std::max(variance, 1e-300);
    const double variance_floor = 1e-6 * variance;

    Rng rng(seed);
    EmResult best;
    int best_restart = -1;
    std::vector<double> restart_logliks;
    for (int r = 0; r < restarts; ++r) {
        // Means at random distinct sample quantiles; redraw on collisions so
        // the components start apart whenever the data allows it.
        std::vector<Component> init(k);
        std::vector<double> qs(k);
        for (int attempt = 0; attempt < 64; ++attempt) {
            for (std::size_t c = 0; c < k; ++c) qs[c] = sample_quantile(sorted, rng.uniform01());
            std::sort(qs.begin(), qs.end());
            bool distinct = true;
            for (std::size_t c = 0; c + 1 < k; ++c) distinct &= qs[c] != qs[c + 1];
            if (distinct || k == 1) break;
        }
        // Start from the moments of a hard nearest-seed assignment. Seeding
        // every component at the overall sample variance instead would let
        // one wide component swallow both clusters of a well-separated
        // mixture before the means can move apart.
        std::vector<double> count(k, 0.0), sum(k, 0.0), sumsq(k, 0.0);
        for (const double x : sorted) {
            std::size_t nearest = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (std::abs(x - qs[c]) < std::abs(x - qs[nearest])) nearest = c;
            count[nearest] += 1.0;
            sum[nearest] += x;
            sumsq[nearest] += x * x;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0.0) { // empty cell: fall back to the wide start
                init[c] = {1.0 / static_cast<double>(k), qs[c], variance};
                continue;
            }
            const double cell_mean = sum[c] / count[c];
            const double cell_var =
                std::max(sumsq[c] / count[c] - cell_mean * cell_mean, variance_floor);
            init[c] = {count[c] / static_cast<double>(sorted.size()), cell_mean, cell_var};
        }
        EmResult fit = run_em(samples, std::move(init), variance_floor);
        restart_logliks.push_back(fit.degenerate ? -std::numeric_limits<double>::infinity()
                                                 : fit.log_likelihood);
        if (!fit.degenerate && fit.log_likelihood > best.log_likelihood) {
            best = std::move(fit);
            best_restart = r;
        }
    }
    if (best_restart < 0) {
        throw Error(ErrorCode::degenerate_fit, "every EM restart collapsed");
    }
    if (report) {
        report->loglik_trace = best.loglik_trace;
        report->restart_logliks = std::move(restart_logliks);
        report->chosen_restart = best_restart;
        report->iterations = static_cast<int>(best.loglik_trace.size());
    }
    return best;
}

} // namespace

Gmm2 fit_gmm2(std::span<const double> samples, int restarts, std::uint64_t seed,
              GmmFitReport* report) {
    if (samples.size() < 4) {
        throw Error(ErrorCode::fit_error,
                    "need at least 4 samples, got " + std::to_string(samples.size()));
    }
    for (double x : samples) {
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::fit_error, "non-finite sample");
        }
    }
    if (restarts < 1) {
        throw Error(ErrorCode::fit_error, "restarts must be >= 1");
    }
    EmResult best = fit_k(samples, 2, restarts, seed, report);

    Gmm2 g;
    for (std::size_t c = 0; c < 2; ++c) {
        g.weights[c] = best.components[c].weight;
        g.means[c] = best.components[c].mean;
        g.variances[c] = best.components[c].variance;
    }
    g.log_likelihood = best.log_likelihood;
    g.n_samples = samples.size();
    return g;
}

double gmm_log_pdf(const Gmm2& g, double d) {
    const double t1 = g.weights[0] > 0.0
                          ? std::log(g.weights[0]) + log_normal_pdf(d, g.means[0], g.variances[0])
                          : -std::numeric_limits<double>::infinity();
    const double t2 = g.weights[1] > 0.0
                          ? std::log(g.weights[1]) + log_normal_pdf(d, g.means[1], g.variances[1])
                          : -std::numeric_limits<double>::infinity();
    return log_sum_exp(t1, t2);
}

double gmm_pdf(const Gmm2& g, double d) {
    return std::exp(gmm_log_pdf(g, d));
}

std::array<double, 3> gmm_bic_by_components(std::span<const double> samples, std::uint64_t seed) {
    if (samples.size() < 4) {
        throw Error(ErrorCode::fit_error, "need at least 4 samples for the BIC diagnostic");
    }
    const double log_n = std::log(static_cast<double>(samples.size()));
    std::array<double, 3> bic{};
    for (std::size_t k = 1; k <= 3; ++k) {
        const EmResult fit = fit_k(samples, k, 3, seed + k, nullptr);
        const double params = static_cast<double>(3 * k - 1);
        bic[k - 1] = -2.0 * fit.log_likelihood + params * log_n;
    }
    return bic;
}

} // namespace tracelr
