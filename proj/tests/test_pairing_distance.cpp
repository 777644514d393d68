#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "tracelr/distance.hpp"
#include "tracelr/pairs.hpp"
#include "tracelr/synth.hpp"

using namespace tracelr;
using testutil::error_code_of;
using testutil::make_matrix;

TEST_SUITE("pairing_distance") {

TEST_CASE("enumerate_pairs labels by subject equality") {
    const auto one = make_matrix({{"A", "r1", {1.0}}, {"A", "r2", {2.0}}, {"A", "r3", {3.0}}});
    const auto p1 = enumerate_pairs(one);
    CHECK(p1.n_same == 3);
    CHECK(p1.n_diff == 0);

    const auto two = make_matrix(
        {{"A", "r1", {1.0}}, {"A", "r2", {2.0}}, {"B", "r1", {3.0}}, {"B", "r2", {4.0}}});
    const auto p2 = enumerate_pairs(two);
    CHECK(p2.n_same == 2);
    CHECK(p2.n_diff == 4);
    CHECK(p2.pairs.size() == 6);

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& pr : p2.pairs) {
        CHECK(pr.i < pr.j);
        CHECK(seen.insert({pr.i, pr.j}).second);
        const bool same = two.info(pr.i).subject_id == two.info(pr.j).subject_id;
        CHECK((pr.label == PairLabel::same_source) == same);
    }

    const auto labels = pair_labels01(p2);
    for (std::size_t i = 0; i < labels.size(); ++i)
        CHECK(labels[i] == (p2.pairs[i].label == PairLabel::same_source ? 1 : 0));
}

TEST_CASE("enumerate_pairs needs two traces") {
    CHECK(error_code_of([] {
              enumerate_pairs(make_matrix({{"A", "r1", {1.0}}}));
          }) == ErrorCode::pairing_error);
}

TEST_CASE("same-source count follows the replicate profile") {
    PanelConfig cfg;
    cfg.replicate_profile = {{1, 2}, {2, 3}, {3, 1}};
    cfg.n_subjects = 6;
    cfg.n_features = 2;
    cfg.seed = 4;
    const auto p = enumerate_pairs(generate_panel(cfg));
    // sum over subjects of C(replicates, 2): 2*0 + 3*1 + 1*3
    CHECK(p.n_same == 6);
    CHECK(p.n_same + p.n_diff == 11 * 10 / 2);
}

TEST_CASE("euclidean matches hand values and the summation oracle") {
    CHECK(euclidean(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) == 5.0);

    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto x = testutil::random_vector(rng, 10);
        const auto y = testutil::random_vector(rng, 10);
        CHECK(euclidean(x, x) == 0.0);
        double sum = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) sum += (x[k] - y[k]) * (x[k] - y[k]);
        CHECK(euclidean(x, y) == doctest::Approx(std::sqrt(sum)).epsilon(1e-12));
    }

    CHECK(error_code_of([] {
              euclidean(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0});
          }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("pearson_distance spans [0, 2] with pinned values") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> x2{2.0, 4.0, 6.0};
    const std::vector<double> neg{-1.0, -2.0, -3.0};
    CHECK(pearson_distance(x, x2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pearson_distance(x, neg) == doctest::Approx(2.0).epsilon(1e-15));

    // 1 - sqrt(3)/2, from the hand-expanded correlation sums
    const std::vector<double> y{1.0, 2.0, 2.0};
    CHECK(pearson_distance(x, y) == doctest::Approx(0.1339745962155614).epsilon(1e-14));

    CHECK(error_code_of([&] {
              pearson_distance(x, std::vector<double>{5.0, 5.0, 5.0});
          }) == ErrorCode::undefined_correlation);
}

TEST_CASE("spearman_distance works on ranks") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK(spearman_distance(x, std::vector<double>{1.0, 4.0, 9.0}) == 0.0);
    CHECK(spearman_distance(x, std::vector<double>{9.0, 4.0, 1.0}) == 2.0);

    // ties: identical to Pearson on the average-tie rank vectors, bit for bit
    const std::vector<double> tx{1.0, 2.0, 2.0, 3.0};
    const std::vector<double> ty{1.0, 2.0, 3.0, 4.0};
    CHECK(spearman_distance(tx, ty) == pearson_distance(rank_transform(tx), rank_transform(ty)));
}

TEST_CASE("rank_transform uses average ranks for ties") {
    CHECK(rank_transform(std::vector<double>{1.0, 2.0, 2.0, 3.0}) ==
          std::vector<double>{1.0, 2.5, 2.5, 4.0});
    CHECK(rank_transform(std::vector<double>{3.0, 1.0, 2.0}) ==
          std::vector<double>{3.0, 1.0, 2.0});
    CHECK(rank_transform(std::vector<double>{7.0, 7.0, 7.0, 7.0}) ==
          std::vector<double>{2.5, 2.5, 2.5, 2.5});
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto x = testutil::random_vector(rng, 12);
        const auto y = testutil::random_vector(rng, 12);
        auto tx = x;
        for (auto& v : tx) v = std::exp(v) + v * v * v; // strictly increasing on R
        CHECK(spearman_distance(tx, y) == spearman_distance(x, y));
    }
}

TEST_CASE("vectorial_distance is the absolute difference") {
    CHECK(vectorial_distance(std::vector<double>{1.0, 0.5}, std::vector<double>{0.25, 0.75}) ==
          std::vector<double>{0.75, 0.25});
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK(vectorial_distance(x, x) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(vectorial_distance(std::vector<double>{0.0, 1.0, 1.0},
                             std::vector<double>{1.0, 1.0, 0.0}) ==
          std::vector<double>{1.0, 0.0, 1.0});
}

TEST_CASE("all distance kinds are symmetric") {
    std::mt19937_64 rng(4);
    const auto x = testutil::random_vector(rng, 8);
    const auto y = testutil::random_vector(rng, 8);
    CHECK(euclidean(x, y) == euclidean(y, x));
    CHECK(pearson_distance(x, y) == pearson_distance(y, x));
    CHECK(spearman_distance(x, y) == spearman_distance(y, x));
    CHECK(vectorial_distance(x, y) == vectorial_distance(y, x));
}

TEST_CASE("compute_distances matches the per-pair oracle in pair order") {
    std::mt19937_64 rng(6);
    const auto m = testutil::random_panel(rng, 4, 2, 7);
    const auto pairs = enumerate_pairs(m);

    const auto spear = compute_distances(m, pairs, DistanceKind::spearman);
    REQUIRE(spear.scalar.size() == pairs.pairs.size());
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto& pr = pairs.pairs[p];
        CHECK(spear.scalar[p] == spearman_distance(m.row(pr.i), m.row(pr.j)));
    }

    const auto vec = compute_distances(m, pairs, DistanceKind::vectorial);
    CHECK(vec.vector_dim == m.n_features());
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto& pr = pairs.pairs[p];
        const auto oracle = vectorial_distance(m.row(pr.i), m.row(pr.j));
        for (std::size_t k = 0; k < vec.vector_dim; ++k)
            CHECK(vec.vectors[p * vec.vector_dim + k] == oracle[k]);
    }
}

TEST_CASE("compute_distances respects a feature subset") {
    std::mt19937_64 rng(7);
    const auto m = testutil::random_panel(rng, 3, 2, 6);
    const auto pairs = enumerate_pairs(m);
    DistanceOptions opts;
    opts.feature_subset = {1, 4};
    const auto d = compute_distances(m, pairs, DistanceKind::euclidean, opts);
    CHECK(d.feature_subset == opts.feature_subset);
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        const auto& pr = pairs.pairs[p];
        const std::vector<double> xi{m.row(pr.i)[1], m.row(pr.i)[4]};
        const std::vector<double> xj{m.row(pr.j)[1], m.row(pr.j)[4]};
        CHECK(d.scalar[p] == euclidean(xi, xj));
    }
}

TEST_CASE("compute_distances rejects stale pair sets") {
    std::mt19937_64 rng(8);
    const auto m1 = testutil::random_panel(rng, 3, 2, 4);
    const auto m2 = testutil::random_panel(rng, 3, 2, 4);
    const auto pairs = enumerate_pairs(m1);
    CHECK(error_code_of([&] {
              compute_distances(m2, pairs, DistanceKind::euclidean);
          }) == ErrorCode::stale_pairset);
}

TEST_CASE("per-pair distance failures carry the pair identity") {
    const auto m = make_matrix({{"A", "r1", {1.0, 1.0}}, {"B", "r1", {1.0, 2.0}}});
    const auto pairs = enumerate_pairs(m);
    try {
        compute_distances(m, pairs, DistanceKind::pearson);
        FAIL("expected undefined correlation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::undefined_correlation);
        CHECK(std::string(e.what()).find("pair (0, 1)") != std::string::npos);
    }
}

TEST_CASE("vectorial materialization honors the byte budget") {
    std::mt19937_64 rng(9);
    const auto m = testutil::random_panel(rng, 10, 2, 20);
    const auto pairs = enumerate_pairs(m);
    DistanceOptions opts;
    opts.max_vector_bytes = 64;
    CHECK(error_code_of([&] {
              compute_distances(m, pairs, DistanceKind::vectorial, opts);
          }) == ErrorCode::config_error);
}

TEST_CASE("distance computation is thread-count invariant") {
    std::mt19937_64 rng(10);
    const auto m = testutil::random_panel(rng, 6, 3, 9);
    const auto pairs = enumerate_pairs(m);
    DistanceOptions seq, par;
    seq.threads = 1;
    par.threads = 4;
    CHECK(compute_distances(m, pairs, DistanceKind::spearman, seq).scalar ==
          compute_distances(m, pairs, DistanceKind::spearman, par).scalar);
}

TEST_CASE("pair design streams difference rows plus an intercept column") {
    std::mt19937_64 rng(12);
    const auto m = testutil::random_panel(rng, 3, 2, 4);
    const auto pairs = enumerate_pairs(m);
    const auto design = make_pair_design(m, pairs);
    CHECK(design.rows == pairs.pairs.size());
    CHECK(design.cols == m.n_features() + 1);
    std::vector<double> block(2 * design.cols);
    design.fill(1, 2, block.data());
    for (std::size_t r = 0; r < 2; ++r) {
        const auto& pr = pairs.pairs[1 + r];
        const auto oracle = vectorial_distance(m.row(pr.i), m.row(pr.j));
        for (std::size_t k = 0; k < m.n_features(); ++k)
            CHECK(block[r * design.cols + k] == oracle[k]);
        CHECK(block[r * design.cols + m.n_features()] == 1.0);
    }
}

} // TEST_SUITE
