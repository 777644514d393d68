#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tracelr {

double mean(std::span<const double> values);

// Sample standard deviation (ddof = 1); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);

// Median of the values (input is copied, not modified).
double median(std::span<const double> values);

// Linearly interpolated quantile of sorted order statistics, p in [0, 1]
// (the "type 7" rule: index (n-1)*p).
double quantile(std::span<const double> values, double p);

// log(sum(exp(a), exp(b))) without overflow; handles -inf operands.
double log_sum_exp(double a, double b);

// Numerically stable logistic 1/(1+exp(-x)); exact 0/1 at extreme x.
double sigmoid(double x);

// Standard normal CDF.
double normal_cdf(double z);

// FNV-1a 64-bit, usable incrementally.
struct Fnv1a64 {
    std::uint64_t state = 1469598103934665603ull;
    void update(const void* data, std::size_t size);
    void update_u64(std::uint64_t value);
    void update_double(double value);
    std::uint64_t digest() const { return state; }
};

} // namespace tracelr
