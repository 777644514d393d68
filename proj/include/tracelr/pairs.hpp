#pragma once

#include <cstdint>
#include <vector>

#include "tracelr/trace_matrix.hpp"

namespace tracelr {

enum class PairLabel : std::uint8_t { same_source, different_source };

struct TracePair {
    std::uint32_t i = 0; // always i < j
    std::uint32_t j = 0;
    PairLabel label = PairLabel::different_source;
};

struct PairSet {
    std::vector<TracePair> pairs; // all C(N,2), i outer / j inner order
    std::size_t n_same = 0;
    std::size_t n_diff = 0;
    std::uint64_t source_fingerprint = 0;
};

// All unordered trace pairs, labeled same-source iff the subject ids match.
PairSet enumerate_pairs(const TraceMatrix& m);

std::vector<std::uint8_t> pair_labels01(const PairSet& pairs); // same_source -> 1

} // namespace tracelr
