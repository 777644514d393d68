#include "tracelr/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "tracelr/error.hpp"
#include "tracelr/parallel.hpp"
#include "tracelr/rng.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

RocCurve roc_auc(std::span<const double> scores_ss, std::span<const double> scores_ds) {
    if (scores_ss.empty() || scores_ds.empty())
        throw Error(ErrorCode::evaluation_error, "both score lists must be non-empty");

    const auto n_ss = static_cast<double>(scores_ss.size());
    const auto n_ds = static_cast<double>(scores_ds.size());

    // Mann-Whitney via average ranks of the combined sample: the same-source
    // rank sum counts wins plus half credit for ties, exactly.
    std::vector<double> combined;
    combined.reserve(scores_ss.size() + scores_ds.size());
    combined.insert(combined.end(), scores_ss.begin(), scores_ss.end());
    combined.insert(combined.end(), scores_ds.begin(), scores_ds.end());
    const std::vector<double> ranks = rank_transform(combined);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < scores_ss.size(); ++i) rank_sum += ranks[i];

    RocCurve roc;
    roc.auc = (rank_sum - n_ss * (n_ss + 1.0) / 2.0) / (n_ss * n_ds);

    std::vector<double> ss_sorted(scores_ss.begin(), scores_ss.end());
    std::vector<double> ds_sorted(scores_ds.begin(), scores_ds.end());
    std::sort(ss_sorted.begin(), ss_sorted.end());
    std::sort(ds_sorted.begin(), ds_sorted.end());

    std::vector<double> distinct = combined;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    const auto point_at = [&](double threshold) {
        RocPoint p;
        p.threshold = threshold;
        const auto ss_below = static_cast<double>(
            std::lower_bound(ss_sorted.begin(), ss_sorted.end(), threshold) - ss_sorted.begin());
        const auto ds_below = static_cast<double>(
            std::lower_bound(ds_sorted.begin(), ds_sorted.end(), threshold) - ds_sorted.begin());
        p.sensitivity = (n_ss - ss_below) / n_ss;
        p.specificity = ds_below / n_ds;
        return p;
    };

    roc.points.reserve(distinct.size() + 1);
    roc.points.push_back(point_at(std::numeric_limits<double>::infinity()));
    for (std::size_t i = distinct.size(); i-- > 1;)
        roc.points.push_back(point_at(0.5 * (distinct[i - 1] + distinct[i])));
    roc.points.push_back(point_at(-std::numeric_limits<double>::infinity()));
    return roc;
}

OperatingPoint youden_best(const RocCurve& roc) {
    if (roc.points.empty()) throw Error(ErrorCode::evaluation_error, "empty ROC curve");
    OperatingPoint best{roc.points.front().threshold, roc.points.front().sensitivity,
                        roc.points.front().specificity};
    double best_j = best.sensitivity + best.specificity - 1.0;
    for (const auto& p : roc.points) {
        const double j = p.sensitivity + p.specificity - 1.0;
        if (j > best_j || (j == best_j && p.specificity > best.specificity)) {
            best = {p.threshold, p.sensitivity, p.specificity};
            best_j = j;
        }
    }
    return best;
}

std::vector<std::vector<std::string>> grouped_kfold(const TraceMatrix& m, int k,
                                                    std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::cv_error, "need at least 2 folds");
    const auto subjects = m.subjects();
    if (subjects.size() < static_cast<std::size_t>(k))
        throw Error(ErrorCode::cv_error, "more folds than subjects (" +
                                             std::to_string(subjects.size()) + " subjects, k=" +
                                             std::to_string(k) + ")");
    std::vector<std::string> ids;
    ids.reserve(subjects.size());
    for (const auto& [id, traces] : subjects) ids.push_back(id);
    Rng rng(seed);
    rng.shuffle(ids);

    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ids.size(); ++i)
        folds[i % static_cast<std::size_t>(k)].push_back(std::move(ids[i]));
    return folds;
}

const char* method_kind_name(MethodKind kind) {
    switch (kind) {
        case MethodKind::direct: return "direct";
        case MethodKind::indirect_scalar: return "indirect-scalar";
        case MethodKind::indirect_vectorial: return "indirect-vectorial";
    }
    return "?";
}

MethodKind method_kind_from_name(const std::string& name) {
    if (name == "direct") return MethodKind::direct;
    if (name == "indirect-scalar") return MethodKind::indirect_scalar;
    if (name == "indirect-vectorial") return MethodKind::indirect_vectorial;
    throw Error(ErrorCode::config_error, "unknown method '" + name + "'");
}

namespace {

// Pair indices used for fitting: all of them, or all same-source plus a
// seeded subsample of different-source when a cap is configured.
std::vector<std::size_t> fit_pair_indices(const PairSet& pairs, std::size_t subsample_ds,
                                          std::uint64_t seed) {
    std::vector<std::size_t> idx;
    if (subsample_ds == 0 || pairs.n_diff <= subsample_ds) {
        idx.resize(pairs.pairs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    std::vector<std::size_t> ds;
    ds.reserve(pairs.n_diff);
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i)
        if (pairs.pairs[i].label == PairLabel::different_source) ds.push_back(i);
    Rng rng(seed);
    rng.shuffle(ds);
    ds.resize(subsample_ds);

    idx.reserve(pairs.n_same + subsample_ds);
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i)
        if (pairs.pairs[i].label == PairLabel::same_source) idx.push_back(i);
    idx.insert(idx.end(), ds.begin(), ds.end());
    std::sort(idx.begin(), idx.end());
    return idx;
}

PairSet subset_pairset(const PairSet& pairs, const std::vector<std::size_t>& idx) {
    PairSet out;
    out.source_fingerprint = pairs.source_fingerprint;
    out.pairs.reserve(idx.size());
    for (const std::size_t i : idx) {
        out.pairs.push_back(pairs.pairs[i]);
        if (pairs.pairs[i].label == PairLabel::same_source)
            ++out.n_same;
        else
            ++out.n_diff;
    }
    return out;
}

DistanceKind scalar_distance_of(const MethodConfig& config) {
    if (config.distance == DistanceKind::vectorial)
        throw Error(ErrorCode::config_error,
                    std::string(method_kind_name(config.kind)) +
                        " needs a scalar distance (euclidean, pearson or spearman)");
    return config.distance;
}

// Scores a pair set through a logistic model over the streamed pair design
// (vectorial mode). Batches write disjoint slots, so the result is
// deterministic under any thread count.
std::vector<double> score_vectorial(const LogisticModel& model, const TraceMatrix& m,
                                    const PairSet& pairs, const MethodConfig& config) {
    const DesignSource design = make_pair_design(m, pairs, config.feature_subset);
    if (design.cols != model.a.size() + 1)
        throw Error(ErrorCode::dimension_mismatch,
                    "model expects " + std::to_string(model.a.size()) +
                        " distance features, design has " + std::to_string(design.cols - 1));
    Eigen::VectorXd theta(static_cast<Eigen::Index>(design.cols));
    for (std::size_t k = 0; k < model.a.size(); ++k)
        theta(static_cast<Eigen::Index>(k)) = model.a[k];
    theta(static_cast<Eigen::Index>(model.a.size())) = model.b;

    std::vector<double> scores(pairs.pairs.size());
    constexpr std::size_t kBatch = 2048;
    const std::size_t n_batches = (pairs.pairs.size() + kBatch - 1) / kBatch;
    parallel_for(
        n_batches, config.threads,
        [&](std::size_t begin, std::size_t end) {
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block(
                kBatch, static_cast<Eigen::Index>(design.cols));
            for (std::size_t b = begin; b < end; ++b) {
                const std::size_t first = b * kBatch;
                const auto count =
                    static_cast<Eigen::Index>(std::min(kBatch, pairs.pairs.size() - first));
                design.fill(first, static_cast<std::size_t>(count), block.data());
                const Eigen::VectorXd s = block.topRows(count) * theta;
                for (Eigen::Index r = 0; r < count; ++r)
                    scores[first + static_cast<std::size_t>(r)] = indirect_posterior_from_score(
                        model, s(r), config.prior_ss);
            }
        },
        1);
    return scores;
}

} // namespace

FittedMethod fit_method(const TraceMatrix& cal, const MethodConfig& config) {
    if (!(config.prior_ss > 0.0 && config.prior_ss < 1.0))
        throw Error(ErrorCode::config_error, "prior must lie strictly inside (0, 1)");
    FittedMethod fitted;
    fitted.config = config;
    if (config.kind == MethodKind::indirect_vectorial)
        fitted.config.distance = DistanceKind::vectorial;

    const PairSet pairs = enumerate_pairs(cal);
    if (pairs.n_same == 0 || pairs.n_diff == 0)
        throw Error(ErrorCode::fit_error,
                    "calibration pairs must include both same-source and different-source");

    const std::vector<std::size_t> idx =
        fit_pair_indices(pairs, config.subsample_ds, config.subsample_seed);
    const bool subsampled = idx.size() != pairs.pairs.size();
    const PairSet fit_pairs = subsampled ? subset_pairset(pairs, idx) : pairs;

    LogisticOptions lopt = config.logistic;
    if (lopt.threads == 0) lopt.threads = config.threads;
    if (subsampled && !lopt.f_ss_override)
        lopt.f_ss_override =
            static_cast<double>(pairs.n_same) / static_cast<double>(pairs.pairs.size());

    switch (config.kind) {
        case MethodKind::direct: {
            DistanceOptions dopt;
            dopt.feature_subset = config.feature_subset;
            dopt.threads = config.threads;
            const DistanceSet d = compute_distances(cal, fit_pairs, scalar_distance_of(config), dopt);
            fitted.direct = fit_direct(d, fit_pairs, config.direct);
            break;
        }
        case MethodKind::indirect_scalar: {
            DistanceOptions dopt;
            dopt.feature_subset = config.feature_subset;
            dopt.threads = config.threads;
            const DistanceSet d = compute_distances(cal, fit_pairs, scalar_distance_of(config), dopt);
            const DesignSource design = make_scalar_design(d.scalar);
            fitted.logistic = fit_logistic(design, pair_labels01(fit_pairs), lopt,
                                           &fitted.logistic_report);
            fitted.logistic.mode = LogisticMode::scalar;
            break;
        }
        case MethodKind::indirect_vectorial: {
            const DesignSource design = make_pair_design(cal, fit_pairs, config.feature_subset);
            fitted.logistic = fit_logistic(design, pair_labels01(fit_pairs), lopt,
                                           &fitted.logistic_report);
            fitted.logistic.mode = LogisticMode::vectorial;
            break;
        }
    }
    return fitted;
}

std::vector<double> score_pairs(const FittedMethod& fitted, const TraceMatrix& m,
                                const PairSet& pairs) {
    const MethodConfig& config = fitted.config;
    if (config.kind == MethodKind::indirect_vectorial)
        return score_vectorial(fitted.logistic, m, pairs, config);

    DistanceOptions dopt;
    dopt.feature_subset = config.feature_subset;
    dopt.threads = config.threads;
    const DistanceSet d = compute_distances(m, pairs, scalar_distance_of(config), dopt);

    std::vector<double> scores(d.scalar.size());
    if (config.kind == MethodKind::direct) {
        parallel_for(d.scalar.size(), config.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p)
                scores[p] = direct_posterior(fitted.direct, d.scalar[p], config.prior_ss);
        });
    } else {
        parallel_for(d.scalar.size(), config.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                const double s = fitted.logistic.a[0] * d.scalar[p] + fitted.logistic.b;
                scores[p] = indirect_posterior_from_score(fitted.logistic, s, config.prior_ss);
            }
        });
    }
    return scores;
}

std::pair<std::vector<double>, std::vector<double>> split_scores(std::span<const double> scores,
                                                                 const PairSet& pairs) {
    if (scores.size() != pairs.pairs.size())
        throw Error(ErrorCode::evaluation_error, "score/pair count mismatch");
    std::vector<double> ss;
    std::vector<double> ds;
    ss.reserve(pairs.n_same);
    ds.reserve(pairs.n_diff);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (pairs.pairs[i].label == PairLabel::same_source)
            ss.push_back(scores[i]);
        else
            ds.push_back(scores[i]);
    }
    return {std::move(ss), std::move(ds)};
}

namespace {

EvalReport report_for(const FittedMethod& fitted, const TraceMatrix& m, const PairSet& pairs,
                      const std::string& dataset) {
    const std::vector<double> scores = score_pairs(fitted, m, pairs);
    const auto [ss, ds] = split_scores(scores, pairs);
    const RocCurve roc = roc_auc(ss, ds);
    const OperatingPoint op = youden_best(roc);

    EvalReport rep;
    rep.auc_pct = 100.0 * roc.auc;
    rep.sn_pct = 100.0 * op.sensitivity;
    rep.sp_pct = 100.0 * op.specificity;
    rep.threshold = std::clamp(op.threshold, 0.0, 1.0);
    rep.n_ss = ss.size();
    rep.n_ds = ds.size();
    rep.method = method_kind_name(fitted.config.kind);
    if (fitted.config.kind != MethodKind::indirect_vectorial)
        rep.method += std::string("/") + distance_kind_name(fitted.config.distance);
    rep.feature_count = fitted.config.feature_subset.empty() ? m.n_features()
                                                             : fitted.config.feature_subset.size();
    rep.dataset = dataset;
    return rep;
}

} // namespace

std::pair<EvalReport, EvalReport> evaluate_method(const TraceMatrix& cal, const TraceMatrix& test,
                                                  const MethodConfig& config) {
    std::unordered_set<std::string> cal_subjects;
    for (const auto& [id, traces] : cal.subjects()) cal_subjects.insert(id);
    for (const auto& [id, traces] : test.subjects())
        if (cal_subjects.count(id))
            throw Error(ErrorCode::leakage_error,
                        "subject '" + id + "' appears in both calibration and test");

    const FittedMethod fitted = fit_method(cal, config);
    const PairSet cal_pairs = enumerate_pairs(cal);
    const PairSet test_pairs = enumerate_pairs(test);
    return {report_for(fitted, cal, cal_pairs, "calibration"),
            report_for(fitted, test, test_pairs, "test")};
}

} // namespace tracelr
