#pragma once

// Shared scaffolding for the test suites: quick panel construction, error-code
// capture, and test-local randomness kept independent of the library's RNG.

#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"

#include "tracelr/error.hpp"
#include "tracelr/trace_matrix.hpp"

namespace testutil {

template <typename F>
tracelr::ErrorCode error_code_of(F&& f) {
    try {
        std::forward<F>(f)();
    } catch (const tracelr::Error& e) {
        return e.code();
    } catch (const std::exception& e) {
        FAIL("expected a tracelr::Error, got: ", e.what());
    }
    FAIL("expected a tracelr::Error, nothing was thrown");
    return tracelr::ErrorCode::io_error;
}

struct Row {
    std::string subject;
    std::string replicate;
    std::vector<double> features;
    tracelr::Gender gender = tracelr::Gender::unknown;
};

inline tracelr::TraceMatrix make_matrix(const std::vector<Row>& rows,
                                        tracelr::Mode mode = tracelr::Mode::raw) {
    std::vector<tracelr::TraceInfo> info;
    std::vector<double> data;
    for (const auto& r : rows) {
        info.push_back({r.subject, r.replicate, r.gender, {}});
        data.insert(data.end(), r.features.begin(), r.features.end());
    }
    const std::size_t n = rows.empty() ? 0 : rows.front().features.size();
    return {std::move(info), std::move(data), n, mode};
}

// n subjects x reps replicates, feature rows drawn uniform positive.
inline tracelr::TraceMatrix random_panel(std::mt19937_64& rng, std::size_t n_subjects,
                                         std::size_t reps, std::size_t n_features) {
    std::uniform_real_distribution<double> area(0.5, 100.0);
    std::vector<Row> rows;
    for (std::size_t s = 0; s < n_subjects; ++s)
        for (std::size_t r = 0; r < reps; ++r) {
            Row row{"S" + std::to_string(s), "r" + std::to_string(r), {}, tracelr::Gender::unknown};
            for (std::size_t k = 0; k < n_features; ++k) row.features.push_back(area(rng));
            rows.push_back(std::move(row));
        }
    return make_matrix(rows);
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -5.0,
                                         double hi = 5.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace testutil
