#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcl/architecture.hpp"
#include "rcl/network.hpp"
#include "rcl/policy.hpp"

namespace rcl {

/// Penultimate features of a policy followed by its class distribution,
/// both from the same eval-mode forward pass.
struct AugmentedState {
    std::vector<double> values;
    std::size_t feature_width = 0;

    std::size_t size() const noexcept { return values.size(); }
    std::span<const double> features() const { return std::span(values).first(feature_width); }
    std::span<const double> distribution() const { return std::span(values).subspan(feature_width); }
};

template <class P>
AugmentedState augmented_state(const P& policy, std::span<const double> input) {
    const ForwardTrace tr = run_forward(policy.params, policy.spec, input, Mode::eval);
    const auto f = tr.features();
    const auto p = tr.output();
    AugmentedState s;
    s.feature_width = f.size();
    s.values.reserve(f.size() + p.size());
    s.values.insert(s.values.end(), f.begin(), f.end());
    s.values.insert(s.values.end(), p.begin(), p.end());
    return s;
}

template <class P>
AugmentedState augmented_state(const P& policy, const Tensor& input) {
    if (input.shape != policy.spec.input_shape) throw ShapeError("input shape does not match the policy");
    return augmented_state(policy, std::span<const double>(input.values));
}

/// Width of the augmented state a policy spec produces.
inline std::size_t augmented_width(const NetworkSpec& policy_spec) {
    return feature_width(policy_spec) + num_classes(policy_spec);
}

/// v(X, pi) over augmented states.
struct ValueNetwork {
    NetworkSpec spec;
    ParameterSet params;

    static ValueNetwork create(std::size_t input_width, std::uint64_t seed, std::size_t hidden = kValueHidden) {
        auto spec = value_network_spec(input_width, hidden);
        auto params = build_network(spec, seed);
        return ValueNetwork{std::move(spec), std::move(params)};
    }

    std::size_t input_width() const { return spec.input_shape.at(0); }
};

inline double value(const ValueNetwork& net, const AugmentedState& s) {
    if (s.size() != net.input_width()) {
        throw ShapeError("augmented state has width " + std::to_string(s.size()) + ", value network expects " +
                         std::to_string(net.input_width()));
    }
    const ForwardTrace tr = run_forward(net.params, net.spec, s.values, Mode::eval);
    return tr.output()[0];
}

/// d v(s) / d Theta_v.
inline Gradients value_grad(const ValueNetwork& net, const AugmentedState& s) {
    if (s.size() != net.input_width()) throw ShapeError("augmented state width does not match the value network");
    const ForwardTrace tr = run_forward(net.params, net.spec, s.values, Mode::eval);
    Gradients g = net.params.zeros_like();
    const double one = 1.0;
    backward(net.params, net.spec, tr, std::span(&one, 1), g);
    return g;
}

struct ValueTarget {
    AugmentedState state;
    double target = 0.0;
};

/// Gradient of the batch mean of (target - v(state))^2. Targets are
/// constants.
inline Gradients value_loss_grad(const ValueNetwork& net, std::span<const ValueTarget> batch) {
    if (batch.empty()) throw ArgumentError("value update needs a nonempty batch");
    Gradients g = net.params.zeros_like();
    for (const auto& item : batch) {
        if (item.state.size() != net.input_width()) throw ShapeError("augmented state width does not match the value network");
        if (!std::isfinite(item.target)) throw NumericError("non-finite value target");
        const ForwardTrace tr = run_forward(net.params, net.spec, item.state.values, Mode::eval);
        const double d = 2.0 * (tr.output()[0] - item.target);
        backward(net.params, net.spec, tr, std::span(&d, 1), g);
    }
    scale_in_place(g, 1.0 / static_cast<double>(batch.size()));
    return g;
}

inline double value_mse(const ValueNetwork& net, std::span<const ValueTarget> batch) {
    double s = 0.0;
    for (const auto& item : batch) {
        const double e = item.target - value(net, item.state);
        s += e * e;
    }
    return s / static_cast<double>(batch.size());
}

/// One descent step on the mean squared error against fixed targets.
inline void value_update(ValueNetwork& net, std::span<const ValueTarget> batch, double rate) {
    const Gradients g = value_loss_grad(net, batch);
    sgd_step(net.params, g, rate, Direction::descent);
}

}  // namespace rcl
