#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "tracelr/direct.hpp"
#include "tracelr/distance.hpp"
#include "tracelr/error.hpp"
#include "tracelr/evaluation.hpp"
#include "tracelr/logistic.hpp"
#include "tracelr/pairs.hpp"
#include "tracelr/trace_matrix.hpp"

using namespace tracelr;
using testutil::error_code_of;
using testutil::Row;

namespace {

// Quadratic-time AUC: count of same-source scores beating different-source
// ones, half credit for ties.
double auc_brute(std::span<const double> ss, std::span<const double> ds) {
    double num = 0.0;
    for (double a : ss)
        for (double b : ds) {
            if (a > b)
                num += 1.0;
            else if (a == b)
                num += 0.5;
        }
    return num / (static_cast<double>(ss.size()) * static_cast<double>(ds.size()));
}

std::vector<double> tied_scores(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> level(0, 16);
    std::vector<double> out(n);
    for (auto& v : out) v = level(rng) / 8.0;
    return out;
}

// Two tight clusters per subject: same-subject rows nearly coincide, so
// euclidean distances separate the pair classes almost perfectly.
TraceMatrix clustered_panel(std::mt19937_64& rng, std::size_t n_subjects, std::size_t reps,
                            std::size_t n_features, double jitter = 0.05) {
    std::uniform_real_distribution<double> area(1.0, 100.0);
    std::uniform_real_distribution<double> wobble(0.0, jitter);
    std::vector<Row> rows;
    for (std::size_t s = 0; s < n_subjects; ++s) {
        std::vector<double> base(n_features);
        for (auto& v : base) v = area(rng);
        for (std::size_t r = 0; r < reps; ++r) {
            std::vector<double> f = base;
            for (auto& v : f) v += wobble(rng);
            rows.push_back({"s" + std::to_string(s + 1), "r" + std::to_string(r + 1), f});
        }
    }
    return testutil::make_matrix(rows);
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("roc_auc pins separable, identical and mixed score sets") {
    const std::vector<double> hi{0.9, 0.8};
    const std::vector<double> lo{0.3, 0.2};
    CHECK(roc_auc(hi, lo).auc == 1.0);
    CHECK(roc_auc(lo, hi).auc == 0.0);

    const std::vector<double> same{0.5, 0.5};
    CHECK(roc_auc(same, same).auc == 0.5);

    // 3 of the 4 cross-pairs ordered correctly
    CHECK(roc_auc(std::vector<double>{0.8, 0.4}, std::vector<double>{0.6, 0.2}).auc == 0.75);

    // one exact tie gets half credit: (0.5 + 3) / 4
    CHECK(roc_auc(std::vector<double>{0.5, 0.7}, std::vector<double>{0.5, 0.3}).auc == 0.875);
}

TEST_CASE("roc_auc rejects empty score sets") {
    const std::vector<double> some{0.5};
    const std::vector<double> none;
    CHECK(error_code_of([&] { roc_auc(none, some); }) == ErrorCode::evaluation_error);
    CHECK(error_code_of([&] { roc_auc(some, none); }) == ErrorCode::evaluation_error);
    CHECK(error_code_of([&] { roc_auc(none, none); }) == ErrorCode::evaluation_error);
}

TEST_CASE("roc_auc matches the quadratic oracle on tied random sets") {
    std::mt19937_64 rng(4101);
    std::uniform_int_distribution<std::size_t> size(1, 40);
    for (int rep = 0; rep < 50; ++rep) {
        const auto ss = tied_scores(rng, size(rng));
        const auto ds = tied_scores(rng, size(rng));
        CHECK(roc_auc(ss, ds).auc == doctest::Approx(auc_brute(ss, ds)).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(4102);
    auto warp = [](double x) { return x * x * x + 2.0 * x + 1.0; };
    for (int rep = 0; rep < 20; ++rep) {
        auto ss = tied_scores(rng, 15);
        auto ds = tied_scores(rng, 25);
        std::vector<double> wss(ss.size()), wds(ds.size());
        std::transform(ss.begin(), ss.end(), wss.begin(), warp);
        std::transform(ds.begin(), ds.end(), wds.begin(), warp);
        CHECK(roc_auc(wss, wds).auc == roc_auc(ss, ds).auc);
    }
}

TEST_CASE("swapping the score sets complements the AUC") {
    std::mt19937_64 rng(4103);
    for (int rep = 0; rep < 20; ++rep) {
        const auto ss = tied_scores(rng, 12);
        const auto ds = tied_scores(rng, 18);
        CHECK(roc_auc(ds, ss).auc == doctest::Approx(1.0 - roc_auc(ss, ds).auc).epsilon(1e-12));
    }
}

TEST_CASE("roc curve runs from the all-reject to the all-accept corner") {
    std::mt19937_64 rng(4104);
    const auto ss = tied_scores(rng, 20);
    const auto ds = tied_scores(rng, 30);
    const RocCurve roc = roc_auc(ss, ds);

    std::set<double> distinct(ss.begin(), ss.end());
    distinct.insert(ds.begin(), ds.end());
    CHECK(roc.points.size() == distinct.size() + 1);

    const RocPoint& first = roc.points.front();
    CHECK(std::isinf(first.threshold));
    CHECK(first.threshold > 0.0);
    CHECK(first.sensitivity == 0.0);
    CHECK(first.specificity == 1.0);

    const RocPoint& last = roc.points.back();
    CHECK(std::isinf(last.threshold));
    CHECK(last.threshold < 0.0);
    CHECK(last.sensitivity == 1.0);
    CHECK(last.specificity == 0.0);

    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        CHECK(roc.points[i].threshold < roc.points[i - 1].threshold);
        CHECK(roc.points[i].sensitivity >= roc.points[i - 1].sensitivity);
        CHECK(roc.points[i].specificity <= roc.points[i - 1].specificity);
    }
}

TEST_CASE("roc thresholds sit between the scores they split") {
    // distinct pooled scores 0.2 0.4 0.6 0.8 -> interior thresholds at midpoints
    const RocCurve roc =
        roc_auc(std::vector<double>{0.8, 0.4}, std::vector<double>{0.6, 0.2});
    REQUIRE(roc.points.size() == 5);
    CHECK(roc.points[1].threshold == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(roc.points[2].threshold == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(roc.points[3].threshold == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("youden_best finds the perfect separator") {
    const RocCurve roc = roc_auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.3, 0.2});
    const OperatingPoint op = youden_best(roc);
    CHECK(op.sensitivity == 1.0);
    CHECK(op.specificity == 1.0);
    CHECK(op.threshold == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("youden ties resolve toward higher specificity") {
    // J = 0.5 both at threshold 0.65 (sn .5, sp 1) and 0.25 (sn 1, sp .5)
    const RocCurve roc = roc_auc(std::vector<double>{0.7, 0.3}, std::vector<double>{0.6, 0.2});
    const OperatingPoint op = youden_best(roc);
    CHECK(op.specificity == 1.0);
    CHECK(op.sensitivity == 0.5);
    CHECK(op.threshold == doctest::Approx(0.65).epsilon(1e-12));
}

TEST_CASE("youden_best matches an exhaustive sweep over the curve") {
    std::mt19937_64 rng(4105);
    for (int rep = 0; rep < 40; ++rep) {
        const auto ss = tied_scores(rng, 8);
        const auto ds = tied_scores(rng, 8);
        const RocCurve roc = roc_auc(ss, ds);
        const OperatingPoint op = youden_best(roc);

        double best_j = -1.0;
        double best_sp = -1.0;
        for (const RocPoint& p : roc.points) {
            const double j = p.sensitivity + p.specificity - 1.0;
            if (j > best_j || (j == best_j && p.specificity > best_sp)) {
                best_j = j;
                best_sp = p.specificity;
            }
        }
        CHECK(op.sensitivity + op.specificity - 1.0 == best_j);
        CHECK(op.specificity == best_sp);
    }
}

TEST_CASE("grouped_kfold keeps folds subject-disjoint and balanced") {
    std::vector<Row> rows;
    for (int s = 1; s <= 7; ++s)
        for (int r = 1; r <= 2; ++r)
            rows.push_back({"s" + std::to_string(s), "r" + std::to_string(r), {1.0, 2.0, double(s)}});
    const TraceMatrix m = testutil::make_matrix(rows);

    const auto folds = grouped_kfold(m, 3, 99);
    REQUIRE(folds.size() == 3);
    std::vector<std::size_t> sizes;
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& fold : folds) {
        sizes.push_back(fold.size());
        total += fold.size();
        for (const auto& id : fold) CHECK(seen.insert(id).second); // no subject straddles folds
    }
    CHECK(total == 7);
    CHECK(*std::max_element(sizes.begin(), sizes.end()) -
              *std::min_element(sizes.begin(), sizes.end()) <=
          1);

    // 6 subjects split 3 ways -> exactly two each
    std::vector<Row> rows6(rows.begin(), rows.begin() + 12);
    const auto even = grouped_kfold(testutil::make_matrix(rows6), 3, 7);
    for (const auto& fold : even) CHECK(fold.size() == 2);
}

TEST_CASE("grouped_kfold is deterministic per seed") {
    std::mt19937_64 rng(4106);
    const TraceMatrix m = testutil::random_panel(rng, 9, 2, 3);
    CHECK(grouped_kfold(m, 4, 31) == grouped_kfold(m, 4, 31));
}

TEST_CASE("grouped_kfold validates the fold count") {
    std::mt19937_64 rng(4107);
    const TraceMatrix m = testutil::random_panel(rng, 5, 2, 3);
    CHECK(error_code_of([&] { grouped_kfold(m, 1, 0); }) == ErrorCode::cv_error);
    CHECK(error_code_of([&] { grouped_kfold(m, 6, 0); }) == ErrorCode::cv_error);
}

TEST_CASE("indirect-scalar scoring equals the per-pair formula") {
    std::mt19937_64 rng(4108);
    const TraceMatrix m = testutil::random_panel(rng, 8, 3, 4);
    MethodConfig config;
    config.kind = MethodKind::indirect_scalar;
    config.distance = DistanceKind::spearman;
    config.prior_ss = 0.4;
    const FittedMethod fitted = fit_method(m, config);

    const PairSet pairs = enumerate_pairs(m);
    const auto scores = score_pairs(fitted, m, pairs);
    REQUIRE(scores.size() == pairs.pairs.size());
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const double d = spearman_distance(m.row(pairs.pairs[p].i), m.row(pairs.pairs[p].j));
        const double s = fitted.logistic.a[0] * d + fitted.logistic.b;
        CHECK(scores[p] == indirect_posterior_from_score(fitted.logistic, s, 0.4));
    }
}

TEST_CASE("direct scoring equals the per-pair density ratio posterior") {
    std::mt19937_64 rng(4109);
    const TraceMatrix m = clustered_panel(rng, 10, 3, 4, 2.0);
    MethodConfig config;
    config.kind = MethodKind::direct;
    config.distance = DistanceKind::euclidean;
    config.prior_ss = 0.3;
    const FittedMethod fitted = fit_method(m, config);

    const PairSet pairs = enumerate_pairs(m);
    const auto scores = score_pairs(fitted, m, pairs);
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const double d = euclidean(m.row(pairs.pairs[p].i), m.row(pairs.pairs[p].j));
        CHECK(scores[p] == direct_posterior(fitted.direct, d, 0.3));
    }
}

TEST_CASE("vectorial scoring matches the explicit difference-vector formula") {
    std::mt19937_64 rng(4110);
    const TraceMatrix m = testutil::random_panel(rng, 8, 3, 5);
    MethodConfig config;
    config.kind = MethodKind::indirect_vectorial;
    config.logistic.ridge = 0.5;
    config.prior_ss = 0.6;
    const FittedMethod fitted = fit_method(m, config);

    const PairSet pairs = enumerate_pairs(m);
    const auto scores = score_pairs(fitted, m, pairs);
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto dv = vectorial_distance(m.row(pairs.pairs[p].i), m.row(pairs.pairs[p].j));
        CHECK(scores[p] ==
              doctest::Approx(indirect_posterior(fitted.logistic, dv, 0.6)).epsilon(1e-12));
    }
}

TEST_CASE("scoring honors a feature subset") {
    std::mt19937_64 rng(4111);
    const TraceMatrix m = testutil::random_panel(rng, 8, 3, 6);
    MethodConfig config;
    config.kind = MethodKind::indirect_scalar;
    config.distance = DistanceKind::euclidean;
    config.feature_subset = {1, 4};
    const FittedMethod fitted = fit_method(m, config);

    const PairSet pairs = enumerate_pairs(m);
    const auto scores = score_pairs(fitted, m, pairs);
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto xi = m.row(pairs.pairs[p].i);
        const auto xj = m.row(pairs.pairs[p].j);
        const std::vector<double> si{xi[1], xi[4]};
        const std::vector<double> sj{xj[1], xj[4]};
        const double s = fitted.logistic.a[0] * euclidean(si, sj) + fitted.logistic.b;
        CHECK(scores[p] == indirect_posterior_from_score(fitted.logistic, s, 0.5));
    }
}

TEST_CASE("split_scores separates by pair label in pair order") {
    PairSet ps;
    ps.pairs = {{0, 1, PairLabel::same_source},
                {0, 2, PairLabel::different_source},
                {1, 2, PairLabel::same_source}};
    ps.n_same = 2;
    ps.n_diff = 1;
    const std::vector<double> scores{10.0, 20.0, 30.0};
    const auto [ss, ds] = split_scores(scores, ps);
    CHECK(ss == std::vector<double>{10.0, 30.0});
    CHECK(ds == std::vector<double>{20.0});

    const std::vector<double> short_scores{1.0};
    CHECK(error_code_of([&] { split_scores(short_scores, ps); }) == ErrorCode::evaluation_error);
}

TEST_CASE("fit_method validates prior, distance and pair classes") {
    std::mt19937_64 rng(4112);
    const TraceMatrix m = testutil::random_panel(rng, 6, 2, 3);

    MethodConfig config;
    config.prior_ss = 0.0;
    CHECK(error_code_of([&] { fit_method(m, config); }) == ErrorCode::config_error);
    config.prior_ss = 1.0;
    CHECK(error_code_of([&] { fit_method(m, config); }) == ErrorCode::config_error);

    MethodConfig vec_dist;
    vec_dist.kind = MethodKind::direct;
    vec_dist.distance = DistanceKind::vectorial;
    CHECK(error_code_of([&] { fit_method(m, vec_dist); }) == ErrorCode::config_error);

    // one trace per subject: no same-source pairs to fit on
    std::vector<Row> singles;
    for (int s = 1; s <= 4; ++s)
        singles.push_back({"s" + std::to_string(s), "r1", {1.0 * s, 2.0, 3.0}});
    const TraceMatrix lone = testutil::make_matrix(singles);
    MethodConfig ok;
    CHECK(error_code_of([&] { fit_method(lone, ok); }) == ErrorCode::fit_error);
}

TEST_CASE("evaluate_method separates a clustered panel and labels both reports") {
    std::mt19937_64 rng(4113);
    const TraceMatrix cal = clustered_panel(rng, 12, 2, 6);
    std::vector<Row> test_rows;
    {
        std::uniform_real_distribution<double> area(1.0, 100.0);
        std::uniform_real_distribution<double> wobble(0.0, 0.05);
        for (std::size_t s = 0; s < 8; ++s) {
            std::vector<double> base(6);
            for (auto& v : base) v = area(rng);
            for (int r = 1; r <= 2; ++r) {
                std::vector<double> f = base;
                for (auto& v : f) v += wobble(rng);
                test_rows.push_back({"t" + std::to_string(s + 1), "r" + std::to_string(r), f});
            }
        }
    }
    const TraceMatrix test = testutil::make_matrix(test_rows);

    MethodConfig config;
    config.kind = MethodKind::indirect_scalar;
    config.distance = DistanceKind::euclidean;
    config.logistic.ridge = 1.0; // clusters are separable; keep the fit bounded

    const auto [cal_rep, test_rep] = evaluate_method(cal, test, config);
    CHECK(cal_rep.dataset == "calibration");
    CHECK(test_rep.dataset == "test");
    CHECK(cal_rep.method == "indirect-scalar/euclidean");
    CHECK(test_rep.auc_pct > 95.0);
    CHECK(test_rep.sn_pct > 90.0);
    CHECK(test_rep.sp_pct > 90.0);
    CHECK(test_rep.threshold >= 0.0);
    CHECK(test_rep.threshold <= 1.0);
    CHECK(test_rep.feature_count == 6);
    CHECK(test_rep.n_ss == 8);
    CHECK(test_rep.n_ds == enumerate_pairs(test).n_diff);
}

TEST_CASE("evaluate_method refuses subject overlap between the splits") {
    std::mt19937_64 rng(4114);
    const TraceMatrix cal = testutil::random_panel(rng, 5, 2, 3);
    // random_panel names subjects S0..Sn, so a fresh panel reuses the ids
    const TraceMatrix test = testutil::random_panel(rng, 3, 2, 3);
    CHECK(error_code_of([&] { evaluate_method(cal, test, MethodConfig{}); }) ==
          ErrorCode::leakage_error);
}

TEST_CASE("report method tag omits the distance for vectorial fits") {
    std::mt19937_64 rng(4115);
    const TraceMatrix cal = clustered_panel(rng, 8, 2, 4);
    const TraceMatrix test = [&] {
        std::vector<Row> rows;
        std::uniform_real_distribution<double> area(1.0, 100.0);
        for (int s = 1; s <= 4; ++s) {
            std::vector<double> base(4);
            for (auto& v : base) v = area(rng);
            for (int r = 1; r <= 2; ++r)
                rows.push_back({"t" + std::to_string(s), "r" + std::to_string(r), base});
        }
        return testutil::make_matrix(rows);
    }();

    MethodConfig config;
    config.kind = MethodKind::indirect_vectorial;
    config.logistic.ridge = 1.0;
    const auto [cal_rep, test_rep] = evaluate_method(cal, test, config);
    CHECK(cal_rep.method == "indirect-vectorial");
    CHECK(cal_rep.feature_count == 4);
}

TEST_CASE("method kind names round-trip") {
    CHECK(method_kind_name(MethodKind::direct) == std::string("direct"));
    CHECK(method_kind_name(MethodKind::indirect_scalar) == std::string("indirect-scalar"));
    CHECK(method_kind_name(MethodKind::indirect_vectorial) == std::string("indirect-vectorial"));
    CHECK(method_kind_from_name("direct") == MethodKind::direct);
    CHECK(method_kind_from_name("indirect-scalar") == MethodKind::indirect_scalar);
    CHECK(method_kind_from_name("indirect-vectorial") == MethodKind::indirect_vectorial);
    CHECK(error_code_of([] { method_kind_from_name("nearest"); }) == ErrorCode::config_error);
}

} // TEST_SUITE
