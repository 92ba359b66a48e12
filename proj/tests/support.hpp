#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rcl/data.hpp"
#include "rcl/network.hpp"
#include "rcl/random.hpp"
#include "rcl/tensor.hpp"

namespace rcl::testing {

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

/// Overwrites every parameter (biases included) with N(0, scale^2) values,
/// so zero-initialized biases do not hide mistakes.
inline void randomize(ParameterSet& params, Rng& rng, double scale = 0.5) {
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& e : params) {
        for (auto& v : e.tensor.values) v = dist(rng);
    }
}

/// Central differences of f over every scalar of `params`.
inline std::vector<double> finite_difference(ParameterSet params, const std::function<double(const ParameterSet&)>& f,
                                             double step = 1e-5) {
    std::vector<double> g;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& vals = params[t].tensor.values;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double keep = vals[i];
            vals[i] = keep + step;
            const double up = f(params);
            vals[i] = keep - step;
            const double down = f(params);
            vals[i] = keep;
            g.push_back((up - down) / (2.0 * step));
        }
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||), with a tiny floor for all-zero vectors.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline double log_prob(const ParameterSet& params, const NetworkSpec& spec, std::span<const double> x, std::size_t y,
                       Mode mode = Mode::eval, const Rng* rng = nullptr) {
    Rng copy = rng ? *rng : Rng{};
    const auto tr = run_forward(params, spec, x, mode, rng ? &copy : nullptr);
    return std::log(tr.output()[y]);
}

/// Relative error between the engine's grad log pi(x, y) and central
/// differences. Train-mode networks replay the same dropout masks from a
/// copied stream.
inline double log_prob_gradient_error(const ParameterSet& params, const NetworkSpec& spec, std::span<const double> x,
                                      std::size_t y, Mode mode = Mode::eval, const Rng* rng = nullptr) {
    Gradients g = params.zeros_like();
    Rng copy = rng ? *rng : Rng{};
    accumulate_log_prob_grad(params, spec, x, y, 1.0, g, mode, rng ? &copy : nullptr);
    const auto fd = finite_difference(params, [&](const ParameterSet& p) { return log_prob(p, spec, x, y, mode, rng); });
    return relative_error(flatten_values(g), fd);
}

}  // namespace rcl::testing
