#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rcl/error.hpp"
#include "rcl/random.hpp"

namespace rcl::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw ArgumentError("mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_sd(std::span<const double> xs) {
    if (xs.empty()) throw ArgumentError("standard deviation of an empty sample");
    if (xs.size() == 1) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double median(std::span<const double> xs) {
    if (xs.empty()) throw ArgumentError("median of an empty sample");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Two-sided sign-flip permutation test on the mean paired difference.
///
/// When all 2^n sign patterns fit in `iterations` the test is exact
/// (p = #{patterns with |mean| >= observed} / 2^n). Otherwise `iterations`
/// random patterns are drawn from `seed` and p = (1 + hits) / (1 + iterations).
inline double paired_permutation_test(std::span<const double> a, std::span<const double> b,
                                      std::size_t iterations = 10000, std::uint64_t seed = 0) {
    if (a.size() != b.size()) throw ArgumentError("paired test needs equal-length samples");
    if (a.size() < 2) throw ArgumentError("paired test needs at least two pairs");
    if (iterations < 1000) throw ArgumentError("paired test needs at least 1000 iterations");

    const std::size_t n = a.size();
    std::vector<double> d(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] - b[i];
        scale = std::max(scale, std::abs(d[i]));
    }
    auto abs_sum = [&](auto sign_of) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += sign_of(i) ? -d[i] : d[i];
        return std::abs(s);
    };
    const double observed = abs_sum([](std::size_t) { return false; });
    // Sums that differ from the observed one by rounding alone count as ties.
    const double threshold = observed - 1e-12 * std::max(1.0, scale * static_cast<double>(n));

    if (n < 63 && (std::uint64_t{1} << n) <= iterations) {
        const std::uint64_t total = std::uint64_t{1} << n;
        std::uint64_t hits = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            hits += abs_sum([&](std::size_t i) { return (mask >> i) & 1u; }) >= threshold;
        }
        return static_cast<double>(hits) / static_cast<double>(total);
    }

    Rng rng = make_stream(seed, {stream::permutation});
    std::vector<bool> flip(n);
    std::size_t hits = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) flip[i] = (rng() >> 63) != 0;
        hits += abs_sum([&](std::size_t i) { return flip[i]; }) >= threshold;
    }
    return static_cast<double>(hits + 1) / static_cast<double>(iterations + 1);
}

}  // namespace rcl::stats
