#include "tracelr/distance.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "tracelr/error.hpp"
#include "tracelr/parallel.hpp"

namespace tracelr {

const char* distance_kind_name(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::euclidean: return "euclidean";
        case DistanceKind::pearson: return "pearson";
        case DistanceKind::spearman: return "spearman";
        case DistanceKind::vectorial: return "vectorial";
    }
    return "spearman";
}

DistanceKind distance_kind_from_name(const std::string& name) {
    if (name == "euclidean") return DistanceKind::euclidean;
    if (name == "pearson") return DistanceKind::pearson;
    if (name == "spearman") return DistanceKind::spearman;
    if (name == "vectorial") return DistanceKind::vectorial;
    throw Error(ErrorCode::config_error, "unknown distance kind '" + name + "'");
}

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "vectors have lengths " + std::to_string(x.size()) + " and " +
                        std::to_string(y.size()));
    }
}

} // namespace

double euclidean(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (x.empty()) {
        throw Error(ErrorCode::dimension_mismatch, "empty vectors");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double pearson_distance(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    const std::size_t n = x.size();
    if (n < 2) {
        throw Error(ErrorCode::dimension_mismatch, "correlation needs length >= 2");
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = x[k] - mx;
        const double dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw Error(ErrorCode::undefined_correlation, "constant vector under correlation distance");
    }
    const double r = sxy / std::sqrt(sxx * syy);
    // rounding can push |r| a hair past 1
    return 1.0 - std::clamp(r, -1.0, 1.0);
}

std::vector<double> rank_transform(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman_distance(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    const auto rx = rank_transform(x);
    const auto ry = rank_transform(y);
    return pearson_distance(rx, ry);
}

std::vector<double> vectorial_distance(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::abs(x[k] - y[k]);
    return out;
}

namespace {

// Rows of the matrix restricted to a subset, gathered into a scratch buffer.
// With an empty subset the row is used in place.
class SubsetRows {
public:
    SubsetRows(const TraceMatrix& m, std::span<const std::size_t> subset)
        : m_(m), subset_(subset.begin(), subset.end()) {
        for (std::size_t k : subset_) {
            if (k >= m.n_features()) {
                throw Error(ErrorCode::dimension_mismatch,
                            "feature index " + std::to_string(k) + " out of range");
            }
        }
    }

    std::size_t dim() const { return subset_.empty() ? m_.n_features() : subset_.size(); }

    std::span<const double> get(std::size_t i, std::vector<double>& scratch) const {
        auto r = m_.row(i);
        if (subset_.empty()) return r;
        scratch.resize(subset_.size());
        for (std::size_t k = 0; k < subset_.size(); ++k) scratch[k] = r[subset_[k]];
        return scratch;
    }

private:
    const TraceMatrix& m_;
    std::vector<std::size_t> subset_;
};

} // namespace

DistanceSet compute_distances(const TraceMatrix& m, const PairSet& pairs, DistanceKind kind,
                              const DistanceOptions& opts) {
    if (pairs.source_fingerprint != m.fingerprint()) {
        throw Error(ErrorCode::stale_pairset,
                    "pair set was built from a different matrix (fingerprint mismatch)");
    }
    SubsetRows rows(m, opts.feature_subset);
    const std::size_t n_pairs = pairs.pairs.size();
    const std::size_t dim = rows.dim();

    DistanceSet result;
    result.kind = kind;
    result.feature_subset = opts.feature_subset;

    if (kind == DistanceKind::vectorial) {
        const std::size_t bytes = n_pairs * dim * sizeof(double);
        if (bytes > opts.max_vector_bytes) {
            throw Error(ErrorCode::config_error,
                        "materializing " + std::to_string(bytes) +
                            " bytes of difference vectors exceeds the budget; use the streaming "
                            "design instead");
        }
        result.vector_dim = dim;
        result.vectors.resize(n_pairs * dim);
        parallel_for(n_pairs, opts.threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> sa, sb;
            for (std::size_t p = begin; p < end; ++p) {
                const auto& pr = pairs.pairs[p];
                const auto x = rows.get(pr.i, sa);
                const auto y = rows.get(pr.j, sb);
                double* out = result.vectors.data() + p * dim;
                for (std::size_t k = 0; k < dim; ++k) out[k] = std::abs(x[k] - y[k]);
            }
        });
        return result;
    }

    // Scalar kinds. Spearman replaces each trace by its rank vector once,
    // then applies the Pearson formula per pair, which matches a per-pair
    // spearman_distance call bit for bit.
    std::vector<double> rank_rows;
    if (kind == DistanceKind::spearman) {
        rank_rows.resize(m.size() * dim);
        parallel_for(m.size(), opts.threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> scratch;
            for (std::size_t i = begin; i < end; ++i) {
                const auto r = rows.get(i, scratch);
                const auto ranks = rank_transform(r);
                std::copy(ranks.begin(), ranks.end(), rank_rows.begin() + i * dim);
            }
        }, 64);
    }

    result.scalar.resize(n_pairs);
    parallel_for(n_pairs, opts.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> sa, sb;
        for (std::size_t p = begin; p < end; ++p) {
            const auto& pr = pairs.pairs[p];
            try {
                switch (kind) {
                    case DistanceKind::euclidean:
                        result.scalar[p] = euclidean(rows.get(pr.i, sa), rows.get(pr.j, sb));
                        break;
                    case DistanceKind::pearson:
                        result.scalar[p] = pearson_distance(rows.get(pr.i, sa), rows.get(pr.j, sb));
                        break;
                    case DistanceKind::spearman: {
                        std::span<const double> rx{rank_rows.data() + pr.i * dim, dim};
                        std::span<const double> ry{rank_rows.data() + pr.j * dim, dim};
                        result.scalar[p] = pearson_distance(rx, ry);
                        break;
                    }
                    case DistanceKind::vectorial: break; // handled above
                }
            } catch (const Error& e) {
                throw Error(e.code(), "pair (" + std::to_string(pr.i) + ", " +
                                          std::to_string(pr.j) + "): " + e.what());
            }
        }
    });
    return result;
}

DesignSource make_pair_design(const TraceMatrix& m, const PairSet& pairs,
                              std::span<const std::size_t> feature_subset) {
    if (pairs.source_fingerprint != m.fingerprint()) {
        throw Error(ErrorCode::stale_pairset,
                    "pair set was built from a different matrix (fingerprint mismatch)");
    }
    auto rows = std::make_shared<SubsetRows>(m, feature_subset);
    const std::size_t dim = rows->dim();

    DesignSource src;
    src.rows = pairs.pairs.size();
    src.cols = dim + 1;
    src.fill = [&m, &pairs, rows, dim](std::size_t first, std::size_t count, double* out) {
        std::vector<double> sa, sb;
        for (std::size_t p = 0; p < count; ++p) {
            const auto& pr = pairs.pairs[first + p];
            const auto x = rows->get(pr.i, sa);
            const auto y = rows->get(pr.j, sb);
            double* dst = out + p * (dim + 1);
            for (std::size_t k = 0; k < dim; ++k) dst[k] = std::abs(x[k] - y[k]);
            dst[dim] = 1.0;
        }
    };
    return src;
}

DesignSource make_scalar_design(std::span<const double> distances) {
    DesignSource src;
    src.rows = distances.size();
    src.cols = 2;
    src.fill = [distances](std::size_t first, std::size_t count, double* out) {
        for (std::size_t p = 0; p < count; ++p) {
            out[p * 2] = distances[first + p];
            out[p * 2 + 1] = 1.0;
        }
    };
    return src;
}

} // namespace tracelr
