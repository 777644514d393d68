#include "tracelr/logistic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "tracelr/error.hpp"
#include "tracelr/parallel.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

const char* logistic_mode_name(LogisticMode mode) {
    return mode == LogisticMode::scalar ? "scalar" : "vectorial";
}

LogisticMode logistic_mode_from_name(const std::string& name) {
    if (name == "scalar") return LogisticMode::scalar;
    if (name == "vectorial") return LogisticMode::vectorial;
    throw Error(ErrorCode::config_error, "unknown logistic mode '" + name + "'");
}

namespace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kBatchRows = 2048;
constexpr std::size_t kStripes = 16;
constexpr int kMaxBacktracks = 60;
// A fitted coefficient this large on any axis is a diverging fit in practice.
constexpr double kSeparationNorm = 1e2;

double softplus(double s) {
    return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

struct Pass {
    double loglik = 0.0; // unpenalized log-likelihood
    Vector gradient;     // X^T (y - p), unpenalized
    Matrix normal;       // X^T W X, lower triangle; empty unless requested
    // Smallest signed margin score * (2y - 1); strictly positive means every
    // sample is classified correctly with room to spare, which only a
    // completely separated data set allows.
    double min_margin = std::numeric_limits<double>::infinity();
};

// One pass over every design row at parameters theta. Batches are dealt to a
// fixed set of stripes (batch index mod kStripes); each stripe accumulates its
// batches in order and the stripes are reduced in index order, so the result
// does not depend on the thread count.
Pass stream_pass(const DesignSource& design, std::span<const std::uint8_t> labels,
                 const Vector& theta, bool want_normal, int threads) {
    const std::size_t cols = design.cols;
    const std::size_t n_batches = (design.rows + kBatchRows - 1) / kBatchRows;
    const std::size_t stripes = std::min(kStripes, n_batches == 0 ? std::size_t{1} : n_batches);

    std::vector<Pass> partial(stripes);
    for (auto& p : partial) {
        p.gradient = Vector::Zero(static_cast<Eigen::Index>(cols));
        if (want_normal)
            p.normal = Matrix::Zero(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(cols));
    }

    parallel_tasks(stripes, threads, [&](std::size_t stripe) {
        Pass& acc = partial[stripe];
        RowMajor block(kBatchRows, static_cast<Eigen::Index>(cols));
        RowMajor weighted;
        if (want_normal) weighted.resize(kBatchRows, static_cast<Eigen::Index>(cols));
        Vector resid(kBatchRows);
        Vector sqrt_w(kBatchRows);
        for (std::size_t batch = stripe; batch < n_batches; batch += stripes) {
            const std::size_t first = batch * kBatchRows;
            const auto count =
                static_cast<Eigen::Index>(std::min(kBatchRows, design.rows - first));
            design.fill(first, static_cast<std::size_t>(count), block.data());
            const auto rows = block.topRows(count);
            const Vector score = rows * theta;
            for (Eigen::Index r = 0; r < count; ++r) {
                const double s = score(r);
                const double y = static_cast<double>(labels[first + static_cast<std::size_t>(r)]);
                acc.loglik += y * s - softplus(s);
                acc.min_margin = std::min(acc.min_margin, s * (2.0 * y - 1.0));
                const double p = sigmoid(s);
                resid(r) = y - p;
                if (want_normal) sqrt_w(r) = std::sqrt(p * (1.0 - p));
            }
            acc.gradient.noalias() += rows.transpose() * resid.head(count);
            if (want_normal) {
                weighted.topRows(count).noalias() = sqrt_w.head(count).asDiagonal() * rows;
                acc.normal.selfadjointView<Eigen::Lower>().rankUpdate(
                    weighted.topRows(count).transpose());
            }
        }
    });

    Pass total;
    total.gradient = Vector::Zero(static_cast<Eigen::Index>(cols));
    if (want_normal)
        total.normal = Matrix::Zero(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(cols));
    for (const auto& p : partial) {
        total.loglik += p.loglik;
        total.gradient += p.gradient;
        total.min_margin = std::min(total.min_margin, p.min_margin);
        if (want_normal) total.normal += p.normal;
    }
    return total;
}

} // namespace

LogisticModel fit_logistic(const DesignSource& design, std::span<const std::uint8_t> labels,
                           const LogisticOptions& options, LogisticFitReport* report) {
    if (design.cols < 2)
        throw Error(ErrorCode::fit_error, "design must carry at least one distance feature");
    if (design.rows != labels.size())
        throw Error(ErrorCode::fit_error, "label count does not match design rows");
    if (options.ridge < 0.0) throw Error(ErrorCode::config_error, "ridge must be non-negative");
    if (options.max_iter < 1) throw Error(ErrorCode::config_error, "max_iter must be positive");
    if (!(options.tol > 0.0)) throw Error(ErrorCode::config_error, "tol must be positive");
    if (options.f_ss_override && !(*options.f_ss_override > 0.0 && *options.f_ss_override < 1.0))
        throw Error(ErrorCode::config_error, "f_ss override must lie strictly inside (0, 1)");

    std::size_t n_ss = 0;
    for (const auto y : labels) {
        if (y > 1) throw Error(ErrorCode::fit_error, "labels must be 0 or 1");
        n_ss += y;
    }
    const std::size_t n_ds = labels.size() - n_ss;
    if (n_ss == 0 || n_ds == 0)
        throw Error(ErrorCode::fit_error, "fit needs at least one sample of each source label");

    const auto m = static_cast<Eigen::Index>(design.cols - 1); // intercept is the last column
    Vector theta = Vector::Zero(m + 1);
    theta(m) = std::log(static_cast<double>(n_ss) / static_cast<double>(n_ds));

    const double ridge = options.ridge;
    const auto penalized = [&](double loglik, const Vector& th) {
        return loglik - 0.5 * ridge * th.head(m).squaredNorm();
    };

    Pass cur = stream_pass(design, labels, theta, true, options.threads);
    double objective = penalized(cur.loglik, theta);

    LogisticFitReport rep;
    rep.objective_trace.push_back(objective);

    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;

    for (int iter = 0; iter < options.max_iter; ++iter) {
        Vector grad = cur.gradient;
        grad.head(m) -= ridge * theta.head(m);
        gradient_norm = grad.cwiseAbs().maxCoeff();
        if (gradient_norm < options.tol) {
            converged = true;
            break;
        }

        Matrix normal = cur.normal;
        normal.diagonal().head(m).array() += ridge;
        Vector delta = normal.selfadjointView<Eigen::Lower>().ldlt().solve(grad);
        bool newton = delta.allFinite();
        if (!newton) ++rep.hessian_fallbacks;

        // Accept the longest step that improves the objective; fall back to
        // the raw gradient direction when the Newton step is unusable.
        bool accepted = false;
        Vector candidate;
        double cand_objective = 0.0;
        Pass cand_pass;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            const Vector& direction = newton ? delta : grad;
            double step = 1.0;
            for (int t = 0; t < kMaxBacktracks; ++t) {
                candidate = theta + step * direction;
                cand_pass = stream_pass(design, labels, candidate, false, options.threads);
                cand_objective = penalized(cand_pass.loglik, candidate);
                if (std::isfinite(cand_objective) && cand_objective > objective) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted && newton) {
                newton = false; // retry along the gradient
                ++rep.hessian_fallbacks;
            } else {
                break;
            }
        }
        if (!accepted) {
            // Near the optimum the objective goes flat to rounding while the
            // gradient can still sit just above tol. The full Newton step
            // keeps contracting the gradient even when the objective cannot
            // move, so take it whenever it does.
            bool polished = false;
            if (delta.allFinite()) {
                const Vector polish = theta + delta;
                Pass next = stream_pass(design, labels, polish, true, options.threads);
                Vector polish_grad = next.gradient;
                polish_grad.head(m) -= ridge * polish.head(m);
                const double polish_norm = polish_grad.cwiseAbs().maxCoeff();
                const double polish_objective = penalized(next.loglik, polish);
                if (std::isfinite(polish_objective) && polish_norm < gradient_norm) {
                    theta = polish;
                    objective = polish_objective;
                    cur = std::move(next);
                    ++iterations;
                    rep.objective_trace.push_back(objective);
                    polished = true;
                }
            }
            if (!polished) break; // no direction helps: numerically at a stationary point
            continue;
        }

        theta = candidate;
        ++iterations;
        objective = cand_objective;
        rep.objective_trace.push_back(objective);
        cur = stream_pass(design, labels, theta, true, options.threads);
    }

    if (!converged) {
        // Re-check the gradient at the final parameters (the loop may have
        // exhausted max_iter right after an accepting step).
        Vector grad = cur.gradient;
        grad.head(m) -= ridge * theta.head(m);
        gradient_norm = grad.cwiseAbs().maxCoeff();
        converged = gradient_norm < options.tol;
    }

    rep.gradient_norm = gradient_norm;
    rep.coefficient_norm = theta.cwiseAbs().maxCoeff();
    // Concavity makes this exact: once some theta classifies every sample
    // strictly correctly, the unpenalized maximizer sits at infinity and a
    // small gradient only means the residuals decayed below tol on the way.
    const bool separated = ridge == 0.0 && cur.min_margin > 0.0;
    if (separated) converged = false;
    if (!converged) {
        char grad_text[32];
        std::snprintf(grad_text, sizeof grad_text, "%.3g", gradient_norm);
        rep.note = "stopped after " + std::to_string(iterations) +
                   " iterations with max-abs gradient " + grad_text;
        if (separated)
            rep.note += "; the classes are completely separated, so the unpenalized "
                        "optimum is unbounded (consider ridge > 0)";
        else if (rep.coefficient_norm > kSeparationNorm)
            rep.note += "; coefficients diverged, the classes may be completely "
                        "separated (consider ridge > 0)";
    }

    LogisticModel model;
    model.a.assign(theta.data(), theta.data() + m);
    model.b = theta(m);
    model.ridge = ridge;
    model.converged = converged;
    model.iterations = iterations;
    model.mode = m == 1 ? LogisticMode::scalar : LogisticMode::vectorial;
    const double f_ss = options.f_ss_override
                            ? *options.f_ss_override
                            : static_cast<double>(n_ss) / static_cast<double>(labels.size());
    model.f_ss = f_ss;
    model.f_ds = 1.0 - f_ss;

    if (report) *report = rep;
    return model;
}

LogisticModel fit_logistic(const std::vector<std::pair<std::vector<double>, int>>& design,
                           const LogisticOptions& options, LogisticFitReport* report) {
    if (design.empty()) throw Error(ErrorCode::fit_error, "empty design");
    const std::size_t m = design.front().first.size();
    if (m == 0) throw Error(ErrorCode::fit_error, "design must carry at least one distance feature");

    std::vector<double> buffer(design.size() * (m + 1));
    std::vector<std::uint8_t> labels(design.size());
    for (std::size_t r = 0; r < design.size(); ++r) {
        const auto& [features, label] = design[r];
        if (features.size() != m)
            throw Error(ErrorCode::dimension_mismatch, "design rows have unequal feature counts");
        if (label != 0 && label != 1)
            throw Error(ErrorCode::fit_error, "labels must be 0 or 1");
        double* dst = buffer.data() + r * (m + 1);
        std::copy(features.begin(), features.end(), dst);
        dst[m] = 1.0;
        labels[r] = static_cast<std::uint8_t>(label);
    }

    DesignSource src;
    src.rows = design.size();
    src.cols = m + 1;
    src.fill = [&buffer, m](std::size_t first, std::size_t count, double* out) {
        std::memcpy(out, buffer.data() + first * (m + 1), count * (m + 1) * sizeof(double));
    };
    return fit_logistic(src, labels, options, report);
}

namespace {

double score_of(const LogisticModel& model, std::span<const double> d) {
    if (d.size() != model.a.size())
        throw Error(ErrorCode::dimension_mismatch,
                    "model expects " + std::to_string(model.a.size()) + " distance features, got " +
                        std::to_string(d.size()));
    double s = model.b;
    for (std::size_t k = 0; k < d.size(); ++k) s += model.a[k] * d[k];
    return s;
}

} // namespace

double logistic_output(const LogisticModel& model, std::span<const double> d) {
    return sigmoid(score_of(model, d));
}

double indirect_posterior(const LogisticModel& model, std::span<const double> d, double prior_ss) {
    return indirect_posterior_from_score(model, score_of(model, d), prior_ss);
}

double indirect_posterior_from_score(const LogisticModel& model, double score, double prior_ss) {
    if (!(prior_ss > 0.0 && prior_ss < 1.0))
        throw Error(ErrorCode::config_error, "prior must lie strictly inside (0, 1)");
    // Odds correction factor; equals 1.0 exactly when prior_ss == f_ss because
    // both products multiply the same two doubles.
    const double c = (model.f_ss * (1.0 - prior_ss)) / (model.f_ds * prior_ss);
    if (c == 1.0) return sigmoid(score);
    return sigmoid(score - std::log(c));
}

double indirect_log_lr(const LogisticModel& model, std::span<const double> d) {
    const double ratio = model.f_ds / model.f_ss;
    return score_of(model, d) + (ratio == 1.0 ? 0.0 : std::log(ratio));
}

LrValue indirect_lr(const LogisticModel& model, std::span<const double> d) {
    LrValue lr;
    lr.log_value = indirect_log_lr(model, d);
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

} // namespace tracelr
