#include "tracelr/feature_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "tracelr/error.hpp"
#include "tracelr/parallel.hpp"
#include "tracelr/stat_tests.hpp"
#include "tracelr/stats_util.hpp"

namespace tracelr {

const char* feature_test_kind_name(FeatureTestKind kind) {
    return kind == FeatureTestKind::wilcoxon ? "wilcoxon" : "fisher";
}

FeatureRanking rank_features(const TraceMatrix& m, const PairSet& pairs, int threads) {
    if (pairs.source_fingerprint != m.fingerprint())
        throw Error(ErrorCode::stale_pairset,
                    "pair set was built from a different matrix (fingerprint mismatch)");
    if (m.mode() == Mode::raw)
        throw Error(ErrorCode::config_error,
                    "rank features on a normalized or dichotomized panel, not raw areas");
    if (pairs.n_same == 0 || pairs.n_diff == 0)
        throw Error(ErrorCode::test_error,
                    "ranking needs both same-source and different-source pairs");

    FeatureRanking ranking;
    ranking.test_kind =
        m.mode() == Mode::dichotomized ? FeatureTestKind::fisher : FeatureTestKind::wilcoxon;
    ranking.p_values.assign(m.n_features(), 1.0);

    const bool fisher = ranking.test_kind == FeatureTestKind::fisher;
    parallel_for(
        m.n_features(), threads,
        [&](std::size_t begin, std::size_t end) {
            std::vector<double> ss, ds;
            for (std::size_t k = begin; k < end; ++k) {
                if (fisher) {
                    // label x "differs" table; same-source pairs concentrated
                    // in the equal column make the feature discriminative
                    std::array<std::array<std::uint64_t, 2>, 2> table{};
                    for (const auto& pr : pairs.pairs) {
                        const bool differs = m.row(pr.i)[k] != m.row(pr.j)[k];
                        const std::size_t row = pr.label == PairLabel::same_source ? 0 : 1;
                        ++table[row][differs ? 1 : 0];
                    }
                    ranking.p_values[k] = fisher_exact_p(table);
                } else {
                    ss.clear();
                    ds.clear();
                    for (const auto& pr : pairs.pairs) {
                        const double diff = std::abs(m.row(pr.i)[k] - m.row(pr.j)[k]);
                        (pr.label == PairLabel::same_source ? ss : ds).push_back(diff);
                    }
                    ranking.p_values[k] = wilcoxon_ranksum_p(ss, ds);
                }
            }
        },
        1);

    ranking.order.resize(m.n_features());
    for (std::size_t k = 0; k < ranking.order.size(); ++k) ranking.order[k] = k;
    std::sort(ranking.order.begin(), ranking.order.end(), [&](std::size_t a, std::size_t b) {
        if (ranking.p_values[a] != ranking.p_values[b])
            return ranking.p_values[a] < ranking.p_values[b];
        return a < b;
    });
    return ranking;
}

std::vector<std::size_t> default_count_grid(std::size_t n_features) {
    std::vector<std::size_t> grid{1, 2, 5, 10, 20, 50, 100, 200, 300, 400, 500, 600, 741};
    for (auto& c : grid) c = std::min(c, n_features);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

SelectionResult select_count_cv(const TraceMatrix& cal, const MethodConfig& method,
                                const std::vector<std::size_t>& grid, int k, std::uint64_t seed) {
    if (grid.empty()) throw Error(ErrorCode::cv_error, "empty candidate-count grid");
    SelectionResult result;
    result.grid = grid;
    std::sort(result.grid.begin(), result.grid.end());
    result.grid.erase(std::unique(result.grid.begin(), result.grid.end()), result.grid.end());
    for (const std::size_t c : result.grid)
        if (c == 0 || c > cal.n_features())
            throw Error(ErrorCode::cv_error, "count " + std::to_string(c) +
                                                 " outside [1, " +
                                                 std::to_string(cal.n_features()) + "]");

    const auto folds = grouped_kfold(cal, k, seed);
    const auto subjects = cal.subjects();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const std::size_t c : result.grid)
        result.cv_auc_by_count[c].fold_auc.assign(folds.size(), nan);

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::unordered_set<std::string> held_out(folds[f].begin(), folds[f].end());
        std::vector<std::size_t> train_idx, val_idx;
        for (const auto& [id, traces] : subjects) {
            auto& side = held_out.count(id) ? val_idx : train_idx;
            side.insert(side.end(), traces.begin(), traces.end());
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(val_idx.begin(), val_idx.end());

        const TraceMatrix train = cal.select_traces(train_idx);
        const TraceMatrix val = cal.select_traces(val_idx);
        const PairSet train_pairs = enumerate_pairs(train);
        const PairSet val_pairs = enumerate_pairs(val);
        const FeatureRanking ranking = rank_features(train, train_pairs, method.threads);

        for (const std::size_t c : result.grid) {
            auto& stats = result.cv_auc_by_count[c];
            try {
                MethodConfig mc = method;
                mc.feature_subset.assign(ranking.order.begin(),
                                         ranking.order.begin() + static_cast<std::ptrdiff_t>(c));
                std::sort(mc.feature_subset.begin(), mc.feature_subset.end());
                const FittedMethod fitted = fit_method(train, mc);
                const std::vector<double> scores = score_pairs(fitted, val, val_pairs);
                const auto [ss, ds] = split_scores(scores, val_pairs);
                stats.fold_auc[f] = roc_auc(ss, ds).auc;
            } catch (const Error&) {
                // leave NaN: this count is not fittable on this fold
            }
        }
    }

    bool any = false;
    for (const std::size_t c : result.grid) {
        auto& stats = result.cv_auc_by_count[c];
        const bool complete = std::all_of(stats.fold_auc.begin(), stats.fold_auc.end(),
                                          [](double a) { return std::isfinite(a); });
        if (!complete) {
            stats.mean_auc = nan;
            stats.sd_auc = 0.0;
            continue;
        }
        stats.mean_auc = mean(stats.fold_auc);
        stats.sd_auc = sample_sd(stats.fold_auc);
        if (!any || stats.mean_auc > result.cv_auc_by_count[result.best_count].mean_auc) {
            result.best_count = c;
            any = true;
        }
    }
    if (!any)
        throw Error(ErrorCode::cv_error, "no candidate count produced a valid fit on every fold");

    result.full_ranking = rank_features(cal, enumerate_pairs(cal), method.threads);
    return result;
}

} // namespace tracelr
