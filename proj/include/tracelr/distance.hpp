#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tracelr/pairs.hpp"
#include "tracelr/trace_matrix.hpp"

namespace tracelr {

enum class DistanceKind : std::uint8_t { euclidean, pearson, spearman, vectorial };

const char* distance_kind_name(DistanceKind kind);
DistanceKind distance_kind_from_name(const std::string& name);

// sqrt(sum (x_k - y_k)^2)
double euclidean(std::span<const double> x, std::span<const double> y);

// 1 - Pearson correlation, in [0, 2]. Both vectors must be non-constant.
double pearson_distance(std::span<const double> x, std::span<const double> y);

/// 1 - Spearman correlation: Pearson on average-tie ranks.
double spearman_distance(std::span<const double> x, std::span<const double> y);

// Ranks 1..n, ties get the average of their positions.
std::vector<double> rank_transform(std::span<const double> x);

// Component-wise |x_k - y_k|.
std::vector<double> vectorial_distance(std::span<const double> x, std::span<const double> y);

struct DistanceOptions {
    std::vector<std::size_t> feature_subset; // empty = all features
    std::size_t max_vector_bytes = 1ull << 30; // budget for materialized vectorial output
    int threads = 0;
};

struct DistanceSet {
    DistanceKind kind = DistanceKind::spearman;
    std::vector<double> scalar;   // one entry per pair (scalar kinds)
    std::vector<double> vectors;  // row-major pairs x dim (vectorial kind)
    std::size_t vector_dim = 0;
    std::vector<std::size_t> feature_subset; // copied from the options used
};

// One value (or difference vector) per pair, in pair order; identical to a
// sequential run regardless of internal parallelism. Vectorial results are
// materialized only when they fit the byte budget.
DistanceSet compute_distances(const TraceMatrix& m, const PairSet& pairs, DistanceKind kind,
                              const DistanceOptions& opts = {});

// Streaming design-matrix view over the pair difference vectors (plus a
// trailing intercept column of ones); lets O(N^2 * n) fits run without
// materializing the distances. The source holds references to the matrix
// and pair set, which must outlive it.
struct DesignSource {
    std::size_t rows = 0;
    std::size_t cols = 0; // includes the intercept column
    // Fill rows [first, first+count) into `out`, row-major count x cols.
    std::function<void(std::size_t first, std::size_t count, double* out)> fill;
};

DesignSource make_pair_design(const TraceMatrix& m, const PairSet& pairs,
                              std::span<const std::size_t> feature_subset = {});

// Scalar distances as a one-column design (plus intercept).
DesignSource make_scalar_design(std::span<const double> distances);

} // namespace tracelr
