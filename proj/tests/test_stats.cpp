#include <gtest/gtest.h>

#include <vector>

#include "rcl/stats.hpp"

using namespace rcl;

TEST(Summary, ConstantErrors) {
    const std::vector<double> e{20, 20, 20};
    EXPECT_EQ(stats::mean(e), 20.0);
    EXPECT_EQ(stats::sample_sd(e), 0.0);
    EXPECT_EQ(stats::median(e), 20.0);
}

TEST(Summary, SampleStandardDeviation) {
    const std::vector<double> e{10, 20, 30};
    EXPECT_DOUBLE_EQ(stats::mean(e), 20.0);
    EXPECT_DOUBLE_EQ(stats::sample_sd(e), 10.0);
    EXPECT_DOUBLE_EQ(stats::median(e), 20.0);
    EXPECT_DOUBLE_EQ(stats::median(std::vector<double>{4, 1, 3, 2}), 2.5);
    EXPECT_EQ(stats::sample_sd(std::vector<double>{5}), 0.0);
    EXPECT_THROW(stats::mean(std::vector<double>{}), ArgumentError);
}

TEST(Permutation, IdenticalSamplesGivePOne) {
    const std::vector<double> a{10, 12, 9, 15, 11, 13, 8, 10, 14, 12};
    EXPECT_EQ(stats::paired_permutation_test(a, a), 1.0);
    EXPECT_EQ(stats::paired_permutation_test(a, a, 1000, 3), 1.0);
}

TEST(Permutation, ConstantShiftHitsTheAllSameSignBound) {
    std::vector<double> b{10, 12, 9, 15, 11, 13, 8, 10, 14, 12}, a = b;
    for (auto& x : a) x += 30.0;
    // 2^10 = 1024 <= 10^4 sign patterns: exact enumeration, and only the
    // all-plus and all-minus patterns reach the observed |mean|.
    EXPECT_DOUBLE_EQ(stats::paired_permutation_test(a, b, 10000), 2.0 / 1024.0);
}

TEST(Permutation, ExactEnumerationMatchesBruteForce) {
    const std::vector<double> a{3.0, 1.5, 4.0, 2.0, 6.5, 1.0};
    const std::vector<double> b{2.0, 2.5, 1.0, 2.0, 3.5, 0.0};
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    double observed = 0.0;
    for (double x : d) observed += x;
    int hits = 0;
    for (int mask = 0; mask < 64; ++mask) {
        double s = 0.0;
        for (int i = 0; i < 6; ++i) s += (mask >> i & 1) ? -d[i] : d[i];
        hits += std::abs(s) >= std::abs(observed) - 1e-9;
    }
    EXPECT_DOUBLE_EQ(stats::paired_permutation_test(a, b, 1000), hits / 64.0);
}

TEST(Permutation, SymmetricAndDeterministic) {
    std::vector<double> a, b;
    for (int i = 0; i < 20; ++i) {
        a.push_back(10.0 + (i % 7) * 0.9);
        b.push_back(9.0 + (i % 5) * 1.1);
    }
    // 2^20 > 10^4: Monte Carlo branch.
    const double p = stats::paired_permutation_test(a, b, 10000, 4);
    EXPECT_EQ(p, stats::paired_permutation_test(b, a, 10000, 4));
    EXPECT_EQ(p, stats::paired_permutation_test(a, b, 10000, 4));
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(stats::paired_permutation_test(a, b, 1000), stats::paired_permutation_test(b, a, 1000));
}

TEST(Permutation, MonteCarloAgreesWithExactValue) {
    std::vector<double> a, b;
    for (int i = 0; i < 14; ++i) {
        a.push_back(std::sin(i) * 3.0 + 0.8);
        b.push_back(std::cos(i));
    }
    const double exact = stats::paired_permutation_test(a, b, 1u << 14);
    const double mc = stats::paired_permutation_test(a, b, 100000, 9);
    EXPECT_NEAR(mc, exact, 4.0 * std::sqrt(exact * (1 - exact) / 100000.0) + 1e-4);
}

TEST(Permutation, Errors) {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    EXPECT_THROW(stats::paired_permutation_test(a, b), ArgumentError);
    EXPECT_THROW(stats::paired_permutation_test(std::vector<double>{1}, std::vector<double>{2}), ArgumentError);
    EXPECT_THROW(stats::paired_permutation_test(a, a, 999), ArgumentError);
}
