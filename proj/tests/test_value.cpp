#include <gtest/gtest.h>

#include "rcl/architecture.hpp"
#include "rcl/value.hpp"
#include "support.hpp"

using namespace rcl;
using rcl::testing::random_vector;
using rcl::testing::randomize;

TEST(AugmentedState, WidthAndDistribution) {
    // Penultimate hidden width 8, three classes.
    const auto p = Policy::create(mlp_classifier(5, {6, 8}, 3), 1);
    EXPECT_EQ(augmented_width(p.spec), 11u);
    const auto s = augmented_state(p, Tensor({5}, {0.1, 0.2, 0.3, 0.4, 0.5}));
    ASSERT_EQ(s.size(), 11u);
    EXPECT_EQ(s.features().size(), 8u);
    double sum = 0.0;
    for (double v : s.distribution()) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(AugmentedState, SamePassAsForward) {
    const auto p = Policy::create(mlp_classifier(4, {7}, 3), 2);
    const std::vector<double> x{1.0, -1.0, 0.5, 2.0};
    const auto tr = run_forward(p.params, p.spec, x, Mode::eval);
    const auto s = augmented_state(p, x);
    const auto f = tr.features();
    EXPECT_TRUE(std::equal(f.begin(), f.end(), s.features().begin()));
    EXPECT_EQ(class_distribution(p, x), std::vector<double>(s.distribution().begin(), s.distribution().end()));
}

TEST(AugmentedState, ConvPolicyUsesFlattenedConvFeatures) {
    const auto spec = conv_classifier({8, 8, 1}, {2}, 4, 3);
    EXPECT_EQ(feature_width(spec), 3u * 3u * 2u);
    EXPECT_EQ(augmented_width(spec), 21u);
}

TEST(AugmentedState, ChangesAfterTilt) {
    Rng rng = make_stream(3);
    const auto p = Policy::create(mlp_classifier(4, {5}, 3), 3);
    const auto x = random_vector(4, rng);
    auto m = MirrorPolicy::of(p);
    tilt(m, x, 1, 0.1);
    EXPECT_NE(augmented_state(p, x).values, augmented_state(m, x).values);
    EXPECT_EQ(augmented_state(p, x).values, augmented_state(p, x).values);
}

TEST(Value, ZeroParametersGiveZero) {
    auto v = ValueNetwork::create(5, 1);
    for (auto& e : v.params) std::fill(e.tensor.values.begin(), e.tensor.values.end(), 0.0);
    Rng rng = make_stream(2);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(value(v, AugmentedState{random_vector(5, rng), 2}), 0.0);
}

TEST(Value, DeterministicAndWidthChecked) {
    const auto v = ValueNetwork::create(4, 1);
    const AugmentedState s{{0.1, 0.2, 0.3, 0.4}, 1};
    EXPECT_EQ(value(v, s), value(v, s));
    EXPECT_THROW(value(v, AugmentedState{{0.1, 0.2}, 1}), ShapeError);
}

TEST(Value, GradientMatchesFiniteDifferences) {
    Rng rng = make_stream(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto v = ValueNetwork::create(6, static_cast<std::uint64_t>(trial), 8);
        randomize(v.params, rng);
        const AugmentedState s{random_vector(6, rng), 3};
        const auto fd = rcl::testing::finite_difference(v.params, [&](const ParameterSet& p) {
            ValueNetwork w{v.spec, p};
            return value(w, s);
        });
        EXPECT_LT(rcl::testing::relative_error(flatten_values(value_grad(v, s)), fd), 1e-4);
    }
}

TEST(Value, LossGradientMatchesFiniteDifferences) {
    Rng rng = make_stream(5);
    auto v = ValueNetwork::create(4, 1, 6);
    randomize(v.params, rng);
    std::vector<ValueTarget> batch;
    for (int i = 0; i < 3; ++i) batch.push_back({AugmentedState{random_vector(4, rng), 2}, rng() % 2 ? 0.5 : -0.3});
    const auto fd = rcl::testing::finite_difference(v.params, [&](const ParameterSet& p) {
        ValueNetwork w{v.spec, p};
        return value_mse(w, batch);
    });
    EXPECT_LT(rcl::testing::relative_error(flatten_values(value_loss_grad(v, batch)), fd), 1e-4);
}

TEST(ValueUpdate, ExactTargetsLeaveParameters) {
    const auto v0 = ValueNetwork::create(3, 2);
    const AugmentedState s{{0.3, -0.2, 0.9}, 1};
    std::vector<ValueTarget> batch{{s, value(v0, s)}};
    auto v = v0;
    value_update(v, batch, 0.1);
    EXPECT_EQ(v.params, v0.params);
    batch[0].target += 1.0;
    value_update(v, batch, 0.0);
    EXPECT_EQ(v.params, v0.params);
}

TEST(ValueUpdate, SquaredErrorDecreasesMonotonically) {
    Rng rng = make_stream(6);
    auto v = ValueNetwork::create(5, 3);
    const std::vector<ValueTarget> batch{{AugmentedState{random_vector(5, rng), 2}, 1.5}};
    double last = value_mse(v, batch);
    for (int step = 0; step < 100; ++step) {
        value_update(v, batch, 1e-3);
        const double now = value_mse(v, batch);
        if (last < 1e-10) break;
        EXPECT_LT(now, last) << "step " << step;
        last = now;
    }
}

TEST(ValueUpdate, Errors) {
    auto v = ValueNetwork::create(3, 2);
    EXPECT_THROW(value_update(v, std::vector<ValueTarget>{}, 0.1), ArgumentError);
    const std::vector<ValueTarget> wide{{AugmentedState{{1.0, 2.0}, 1}, 0.0}};
    EXPECT_THROW(value_update(v, wide, 0.1), ShapeError);
}
