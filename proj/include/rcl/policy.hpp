#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rcl/error.hpp"
#include "rcl/network.hpp"
#include "rcl/random.hpp"

namespace rcl {

/// The classifier, viewed as the agent's policy pi(X, y).
struct Policy {
    NetworkSpec spec;
    ParameterSet params;

    static Policy create(NetworkSpec spec, std::uint64_t seed) {
        validate(spec);
        auto params = build_network(spec, seed);
        return Policy{std::move(spec), std::move(params)};
    }
};

/// Disposable copy of a policy that exploration tilts.
struct MirrorPolicy {
    NetworkSpec spec;
    ParameterSet params;

    static MirrorPolicy of(const Policy& p) { return MirrorPolicy{p.spec, p.params}; }
};

/// pi(X, .) from an eval-mode forward pass.
template <class P>
std::vector<double> class_distribution(const P& policy, std::span<const double> input) {
    auto tr = run_forward(policy.params, policy.spec, input, Mode::eval);
    return std::move(tr.activations.back());
}

template <class P>
std::vector<double> class_distribution(const P& policy, const Tensor& input) {
    if (input.shape != policy.spec.input_shape) throw ShapeError("input shape does not match the policy");
    return class_distribution(policy, std::span<const double>(input.values));
}

/// Argmax with ties going to the lowest index.
inline std::size_t argmax(std::span<const double> xs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i] > xs[best]) best = i;
    }
    return best;
}

/// Exploration rate ramp, linear in the epoch.
struct EpsilonSchedule {
    double start = 0.3;
    double end = 0.7;
    std::size_t total_epochs = 1;
};

inline double epsilon_at(const EpsilonSchedule& s, std::size_t epoch) {
    if (!(0.0 <= s.start && s.start <= s.end && s.end <= 1.0)) {
        throw ArgumentError("epsilon schedule needs 0 <= start <= end <= 1");
    }
    if (epoch >= s.total_epochs) {
        throw ArgumentError("epoch " + std::to_string(epoch) + " outside schedule of " +
                            std::to_string(s.total_epochs) + " epochs");
    }
    if (s.total_epochs == 1) return s.start;
    const double t = static_cast<double>(epoch) / static_cast<double>(s.total_epochs - 1);
    return s.start + (s.end - s.start) * t;
}

/// Epsilon-greedy where epsilon is the probability of the GREEDY choice:
/// argmax with probability epsilon, otherwise a class drawn uniformly from
/// all classes (the argmax included).
inline std::size_t sample_action(std::span<const double> distribution, double epsilon, Rng& rng) {
    if (distribution.empty()) throw ArgumentError("sample_action: empty distribution");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must be in [0, 1]");
    if (uniform01(rng) < epsilon) return argmax(distribution);
    return uniform_index(rng, distribution.size());
}

/// Theta_mirror <- Theta_policy.
inline void sync_mirror(MirrorPolicy& mirror, const Policy& policy) {
    if (!(mirror.spec == policy.spec)) throw SpecError("mirror and policy have different network specs");
    mirror.params = policy.params;
}

/// One eval-mode gradient-ascent step on log pi'(input, cls).
inline void tilt(MirrorPolicy& mirror, std::span<const double> input, std::size_t cls, double rate) {
    if (rate < 0.0) throw ArgumentError("tilt rate must be non-negative");
    const WeightedExample ex{input, cls, 1.0};
    const Gradients g = grad_weighted_log_prob(mirror.params, mirror.spec, std::span(&ex, 1), Mode::eval);
    sgd_step(mirror.params, g, rate, Direction::ascent);
}

inline void tilt(MirrorPolicy& mirror, const Tensor& input, std::size_t cls, double rate) {
    if (input.shape != mirror.spec.input_shape) throw ShapeError("input shape does not match the mirror policy");
    tilt(mirror, std::span<const double>(input.values), cls, rate);
}

}  // namespace rcl
