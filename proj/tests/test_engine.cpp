#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rcl/architecture.hpp"
#include "rcl/network.hpp"
#include "support.hpp"

using namespace rcl;
using rcl::testing::log_prob_gradient_error;
using rcl::testing::random_vector;
using rcl::testing::randomize;

namespace {

NetworkSpec dense_head(std::size_t in, std::size_t classes) {
    return {{in}, {layer::Dense{in, classes}, layer::SoftmaxHead{classes}}};
}

}  // namespace

TEST(Init, DenseHeadCountsAndZeroBiases) {
    const auto spec = dense_head(4, 3);
    const auto p = build_network(spec, 7);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].name, "layer0.weight");
    EXPECT_EQ(p[0].tensor.shape, (Shape{4, 3}));
    EXPECT_EQ(p[1].tensor.shape, (Shape{3}));
    EXPECT_EQ(p.scalar_count(), 15u);
    for (double b : p[1].tensor.values) EXPECT_EQ(b, 0.0);
}

TEST(Init, SameSeedIsBitIdentical) {
    const auto spec = mlp_classifier(5, {7, 6}, 3);
    EXPECT_EQ(build_network(spec, 11), build_network(spec, 11));
    EXPECT_FALSE(build_network(spec, 11) == build_network(spec, 12));
}

TEST(Init, GlorotBounds) {
    const auto spec = dense_head(20, 10);
    const auto p = build_network(spec, 3);
    const double limit = std::sqrt(6.0 / 30.0);
    double max_abs = 0.0;
    for (double w : p[0].tensor.values) max_abs = std::max(max_abs, std::abs(w));
    EXPECT_LE(max_abs, limit);
    EXPECT_GT(max_abs, 0.5 * limit);
}

TEST(Shapes, ValidConvThenPoolOn64x64) {
    // 3x3 valid convolution: 64 - 3 + 1 = 62; 2x2 pooling: 31.
    NetworkSpec spec{{64, 64, 3}, {layer::Conv2d{3, 8}, layer::Relu{}, layer::MaxPool2d{}}};
    const auto d = infer_dims(spec);
    EXPECT_EQ(d[1].shape(), (Shape{62, 62, 8}));
    EXPECT_EQ(d[3].shape(), (Shape{31, 31, 8}));
}

TEST(Shapes, OddSizesFloorWhenPooling) {
    NetworkSpec spec{{9, 8, 1}, {layer::Conv2d{1, 2}, layer::MaxPool2d{}}};
    EXPECT_EQ(infer_dims(spec).back().shape(), (Shape{3, 3, 2}));
}

TEST(Shapes, RejectsInconsistentSpecs) {
    EXPECT_THROW(infer_dims({{4}, {layer::Dense{5, 2}}}), SpecError);
    EXPECT_THROW(infer_dims({{4, 4, 1}, {layer::Dense{16, 2}}}), SpecError);
    EXPECT_THROW(infer_dims({{2, 2, 1}, {layer::Conv2d{1, 1}}}), SpecError);
    EXPECT_THROW(infer_dims({{4, 4, 2}, {layer::Conv2d{1, 1}}}), SpecError);
    EXPECT_THROW(validate(NetworkSpec{{4}, {layer::Dense{4, 3}}}), SpecError);
    EXPECT_THROW(validate(NetworkSpec{{4}, {layer::Dense{4, 2}, layer::SoftmaxHead{3}}}), SpecError);
    EXPECT_THROW(validate(NetworkSpec{{4}, {layer::SoftmaxHead{4}, layer::Dense{4, 4}}}), SpecError);
}

TEST(Forward, ZeroParametersGiveUniform) {
    const auto spec = mlp_classifier(4, {5}, 3);
    auto p = build_network(spec, 1);
    for (auto& e : p) std::fill(e.tensor.values.begin(), e.tensor.values.end(), 0.0);
    const auto r = forward(p, spec, Tensor({4}, {1.0, -2.0, 3.0, 0.5}), Mode::eval);
    for (double v : r.distribution.values) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Forward, SoftmaxArithmetic) {
    const std::vector<double> z{std::numbers::ln2, 0.0, 0.0};
    const auto p = softmax(z);
    EXPECT_NEAR(p[0], 0.5, 1e-15);
    EXPECT_NEAR(p[1], 0.25, 1e-15);
    EXPECT_NEAR(p[2], 0.25, 1e-15);
}

TEST(Forward, SoftmaxSumsToOneAndStaysInsideUnitInterval) {
    Rng rng = make_stream(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto z = random_vector(1 + trial % 7, rng, trial < 100 ? 3.0 : 30.0);
        const auto p = softmax(z);
        double s = 0.0;
        for (double v : p) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
    const auto big = softmax(std::vector<double>{1000.0, 999.0});
    EXPECT_NEAR(big[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Forward, EvalIsDeterministic) {
    const auto spec = mlp_classifier(6, {8}, 3, 0.5);
    const auto p = build_network(spec, 2);
    const Tensor x({6}, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6});
    EXPECT_EQ(forward(p, spec, x, Mode::eval).distribution, forward(p, spec, x, Mode::eval).distribution);
}

TEST(Forward, Errors) {
    const auto spec = mlp_classifier(3, {4}, 2, 0.5);
    auto p = build_network(spec, 2);
    EXPECT_THROW(forward(p, spec, Tensor({4}), Mode::eval), ShapeError);
    EXPECT_THROW(forward(p, spec, Tensor({3}), Mode::train), ArgumentError);
    p[0].tensor.values[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(forward(p, spec, Tensor({3}, {1.0, 1.0, 1.0}), Mode::eval), NumericError);
}

TEST(CrossEntropy, Examples) {
    EXPECT_NEAR(cross_entropy(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, 2), std::log(3.0), 1e-12);
    EXPECT_EQ(cross_entropy(std::vector<double>{1.0, 0.0, 0.0}, 0), 0.0);
    EXPECT_NEAR(cross_entropy(std::vector<double>{0.5, 0.25, 0.25}, 1), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, FloorAndErrors) {
    EXPECT_NEAR(cross_entropy(std::vector<double>{1.0, 0.0}, 1), -std::log(1e-12), 1e-9);
    EXPECT_THROW(cross_entropy(std::vector<double>{0.5, 0.5}, 2), ArgumentError);
    EXPECT_THROW(cross_entropy(std::vector<double>{0.5, 0.6}, 0), ArgumentError);
}

TEST(LogProbGradient, ZeroWeightsGiveZeroGradient) {
    const auto spec = mlp_classifier(3, {4}, 3);
    const auto p = build_network(spec, 4);
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<WeightedExample> batch{{x, 0, 0.0}, {x, 2, 0.0}};
    EXPECT_EQ(squared_norm(grad_weighted_log_prob(p, spec, batch)), 0.0);
}

TEST(LogProbGradient, MeanSemantics) {
    const auto spec = mlp_classifier(3, {4}, 3);
    const auto p = build_network(spec, 4);
    const std::vector<double> x{1.0, -2.0, 0.5};
    const std::vector<WeightedExample> one{{x, 1, 1.0}};
    const std::vector<WeightedExample> two{{x, 1, 1.0}, {x, 1, 1.0}};
    const auto a = flatten_values(grad_weighted_log_prob(p, spec, one));
    const auto b = flatten_values(grad_weighted_log_prob(p, spec, two));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(LogProbGradient, DoesNotMutateParams) {
    const auto spec = mlp_classifier(3, {4}, 3);
    const auto p = build_network(spec, 4);
    const auto before = snapshot(p);
    const std::vector<double> x{1.0, -2.0, 0.5};
    const std::vector<WeightedExample> one{{x, 1, 1.0}};
    (void)grad_weighted_log_prob(p, spec, one);
    EXPECT_EQ(p, before);
}

// Gradient of log pi(X, y) against central differences, for networks that
// exercise each layer type.
class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, MatchesFiniteDifferences) {
    NetworkSpec spec;
    Mode mode = Mode::eval;
    switch (GetParam()) {
        case 0:  // dense + softmax head
            spec = dense_head(5, 4);
            break;
        case 1:  // relu between dense layers
            spec = mlp_classifier(5, {7}, 3);
            break;
        case 2:  // conv2d + flatten
            spec = {{5, 5, 2}, {layer::Conv2d{2, 3}, layer::Flatten{}, layer::Dense{27, 3}, layer::SoftmaxHead{3}}};
            break;
        case 3:  // maxpool between convolutions
            spec = {{8, 8, 1},
                    {layer::Conv2d{1, 2}, layer::Relu{}, layer::MaxPool2d{}, layer::Conv2d{2, 2}, layer::Flatten{},
                     layer::Dense{2, 3}, layer::SoftmaxHead{3}}};
            break;
        case 4:  // dropout in train mode with fixed masks
            spec = {{6}, {layer::Dense{6, 8}, layer::Relu{}, layer::Dropout{0.6}, layer::Dense{8, 3}, layer::SoftmaxHead{3}}};
            mode = Mode::train;
            break;
        default:  // the full conv classifier
            spec = conv_classifier({10, 10, 1}, {2, 3}, 5, 3);
            break;
    }
    Rng rng = make_stream(100 + static_cast<std::uint64_t>(GetParam()));
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto p = build_network(spec, static_cast<std::uint64_t>(trial));
        randomize(p, rng);
        const auto x = random_vector(shape_size(spec.input_shape), rng);
        const std::size_t y = static_cast<std::size_t>(trial) % num_classes(spec);
        const Rng masks = make_stream(7, {static_cast<std::uint64_t>(trial)});
        const double err = log_prob_gradient_error(p, spec, x, y, mode, mode == Mode::train ? &masks : nullptr);
        EXPECT_LT(err, 1e-4) << "trial " << trial;
        ++checked;
    }
    EXPECT_EQ(checked, 20);
}

INSTANTIATE_TEST_SUITE_P(Layers, LayerGradient, ::testing::Range(0, 6));

TEST(StackGradient, LinearOutputMatchesFiniteDifferences) {
    const auto spec = value_network_spec(6, 5);
    Rng rng = make_stream(9);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = build_network(spec, static_cast<std::uint64_t>(trial));
        randomize(p, rng);
        const auto x = random_vector(6, rng);
        Gradients g = p.zeros_like();
        const auto tr = run_forward(p, spec, x, Mode::eval);
        const double one = 1.0;
        backward(p, spec, tr, std::span(&one, 1), g);
        const auto fd = rcl::testing::finite_difference(
            p, [&](const ParameterSet& q) { return run_forward(q, spec, x, Mode::eval).output()[0]; });
        EXPECT_LT(rcl::testing::relative_error(flatten_values(g), fd), 1e-4);
    }
}

TEST(Dropout, TrainExpectationMatchesEval) {
    const NetworkSpec spec{{6}, {layer::Dense{6, 5}, layer::Dropout{0.5}}};
    Rng init = make_stream(3);
    auto p = build_network(spec, 3);
    randomize(p, init);
    const std::vector<double> x{0.3, -1.2, 0.8, 0.1, 2.0, -0.4};
    const auto eval = run_forward(p, spec, x, Mode::eval).output();
    const std::vector<double> expected(eval.begin(), eval.end());

    constexpr int kMasks = 10000;
    std::vector<double> sum(5, 0.0), sum_sq(5, 0.0);
    Rng rng = make_stream(4);
    for (int i = 0; i < kMasks; ++i) {
        const auto out = run_forward(p, spec, x, Mode::train, &rng).output();
        for (std::size_t k = 0; k < 5; ++k) {
            sum[k] += out[k];
            sum_sq[k] += out[k] * out[k];
        }
    }
    for (std::size_t k = 0; k < 5; ++k) {
        const double mean = sum[k] / kMasks;
        const double var = sum_sq[k] / kMasks - mean * mean;
        const double se = std::sqrt(var / kMasks);
        EXPECT_LE(std::abs(mean - expected[k]), 3.0 * se + 1e-12) << "unit " << k;
    }
}

TEST(Dropout, KeepOneIsIdentityInTrainMode) {
    const NetworkSpec spec{{3}, {layer::Dense{3, 3}, layer::Dropout{1.0}}};
    const auto p = build_network(spec, 1);
    const std::vector<double> x{1.0, 2.0, 3.0};
    Rng rng = make_stream(1);
    const Rng before = rng;
    const auto ta = run_forward(p, spec, x, Mode::train, &rng);
    const auto tb = run_forward(p, spec, x, Mode::eval);
    const auto a = ta.output(), b = tb.output();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    EXPECT_EQ(rng, before);
}

TEST(Trace, ReplayReproducesEachLayer) {
    const auto spec = conv_classifier({8, 8, 1}, {2}, 4, 3);
    const auto p = build_network(spec, 5);
    Rng rng = make_stream(6);
    const auto x = random_vector(64, rng);
    const auto tr = run_forward(p, spec, x, Mode::eval);
    ASSERT_EQ(tr.activations.size(), spec.layers.size() + 1);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        EXPECT_EQ(replay_layer(p, spec, tr, i), tr.activations[i + 1]) << "layer " << i;
    }
}

TEST(Sgd, Examples) {
    ParameterSet p;
    p.add("w", Tensor({1}, {1.0}));
    Gradients g;
    g.add("w", Tensor({1}, {0.5}));
    auto q = p;
    sgd_step(q, g, 0.0, Direction::ascent);
    EXPECT_EQ(q, p);
    sgd_step(q, g, 0.1, Direction::ascent);
    EXPECT_DOUBLE_EQ(q[0].tensor.values[0], 1.05);
    sgd_step(q, g, 0.1, Direction::descent);
    EXPECT_NEAR(q[0].tensor.values[0], 1.0, 1e-15);
}

TEST(Sgd, ShapeMismatchThrows) {
    ParameterSet p;
    p.add("w", Tensor({2}));
    Gradients g;
    g.add("w", Tensor({3}));
    EXPECT_THROW(sgd_step(p, g, 0.1, Direction::ascent), ShapeError);
}

TEST(Snapshot, RoundTripIsExact) {
    const auto spec = mlp_classifier(4, {3}, 2);
    auto p = build_network(spec, 8);
    const auto snap = snapshot(p);
    EXPECT_EQ(snapshot(snap), snap);
    p[0].tensor.values[0] += 1.0;
    EXPECT_FALSE(p == snap);
    restore(p, snap);
    EXPECT_EQ(p, snap);
    const auto other = build_network(mlp_classifier(4, {5}, 2), 8);
    EXPECT_THROW(restore(p, other), ShapeError);
}

TEST(L2, Examples) {
    ParameterSet p;
    p.add("layer0.weight", Tensor({1}, {2.0}));
    p.add("layer0.bias", Tensor({1}, {3.0}));
    const auto zero = l2_penalty_grads(p, 0.0);
    EXPECT_EQ(squared_norm(zero), 0.0);
    const auto g = l2_penalty_grads(p, 0.1);
    EXPECT_NEAR(g[0].tensor.values[0], 0.2, 1e-15);
    EXPECT_EQ(g[1].tensor.values[0], 0.0);
}
