#include "tracelr/pairs.hpp"

#include "tracelr/error.hpp"

namespace tracelr {

PairSet enumerate_pairs(const TraceMatrix& m) {
    const std::size_t n = m.size();
    if (n < 2) {
        throw Error(ErrorCode::pairing_error, "need at least 2 traces to build pairs");
    }
    PairSet set;
    set.pairs.reserve(n * (n - 1) / 2);
    for (std::uint32_t i = 0; i + 1 < n; ++i) {
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const bool same = m.info(i).subject_id == m.info(j).subject_id;
            set.pairs.push_back({i, j, same ? PairLabel::same_source : PairLabel::different_source});
            ++(same ? set.n_same : set.n_diff);
        }
    }
    set.source_fingerprint = m.fingerprint();
    return set;
}

std::vector<std::uint8_t> pair_labels01(const PairSet& pairs) {
    std::vector<std::uint8_t> labels(pairs.pairs.size());
    for (std::size_t p = 0; p < pairs.pairs.size(); ++p) {
        labels[p] = pairs.pairs[p].label == PairLabel::same_source ? 1 : 0;
    }
    return labels;
}

} // namespace tracelr
