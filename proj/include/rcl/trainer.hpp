#pragma once

// Reinforced classifier training and the supervised baselines.
//
// A reinforced epoch has two phases. Exploration visits every training
// sample once: a mirror copy of the policy is tilted toward an
// epsilon-greedy action, and the reward is the resulting drop in training
// plus validation cross-entropy. The update phase then walks minibatches of
// those experiences, first fitting the value network to the discounted
// return and then moving the policy along the advantage-weighted
// log-likelihood of the explored actions plus a damped supervised term.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rcl/architecture.hpp"
#include "rcl/data.hpp"
#include "rcl/error.hpp"
#include "rcl/network.hpp"
#include "rcl/policy.hpp"
#include "rcl/random.hpp"
#include "rcl/value.hpp"

namespace rcl {

enum class Method { reinforced, supervised, dropout, dropout_l2 };

inline Method parse_method(std::string_view s) {
    if (s == "reinforced") return Method::reinforced;
    if (s == "supervised") return Method::supervised;
    if (s == "dropout") return Method::dropout;
    if (s == "dropout+l2") return Method::dropout_l2;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline std::string to_string(Method m) {
    switch (m) {
        case Method::reinforced: return "reinforced";
        case Method::supervised: return "supervised";
        case Method::dropout: return "dropout";
        case Method::dropout_l2: return "dropout+l2";
    }
    return "?";
}

/// Row label used in error tables.
inline std::string display_name(Method m) {
    switch (m) {
        case Method::reinforced: return "Reinforced";
        case Method::supervised: return "Supervised";
        case Method::dropout: return "Dropout";
        case Method::dropout_l2: return "Dropout+L2";
    }
    return "?";
}

/// Weight on the true-label term of the combined policy update.
enum class SupervisedTermWeighting {
    label,      // weight 1: a plain supervised cross-entropy step
    advantage,  // weight A, as the combined update formula is printed
};

enum class Architecture { mlp, conv };

struct TrainConfig {
    Method method = Method::reinforced;

    double supervised_rate = 1e-4;
    double policy_rate = 1e-3;
    double tilt_rate = 1e-3;
    double value_rate = 1e-3;
    double supervised_damping = 0.1;  // c
    double gamma = 0.9;
    double epsilon_start = 0.3;
    double epsilon_end = 0.7;
    std::size_t minibatch_size = 16;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;

    double l2_lambda = 0.1;
    double keep_prob = 0.5;

    SupervisedTermWeighting supervised_term_weighting = SupervisedTermWeighting::label;
    /// Scales the advantage-weighted explored-action term; 0 leaves only the
    /// damped supervised term.
    double reinforced_term_weight = 1.0;
    std::size_t workers = 1;

    Architecture architecture = Architecture::mlp;
    std::vector<std::size_t> hidden = {64, 64};
    std::vector<std::size_t> conv_channels = {8, 16};
    std::size_t dense_hidden = 32;
    std::size_t value_hidden = kValueHidden;
};

inline void validate(const TrainConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(c.supervised_rate, "supervised_rate");
    positive(c.policy_rate, "policy_rate");
    positive(c.tilt_rate, "tilt_rate");
    positive(c.value_rate, "value_rate");
    if (!(c.supervised_damping > 0.0 && c.supervised_damping < 1.0)) {
        throw ConfigError("supervised_damping must be in (0, 1)");
    }
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(0.0 <= c.epsilon_start && c.epsilon_start <= c.epsilon_end && c.epsilon_end <= 1.0)) {
        throw ConfigError("epsilon schedule needs 0 <= epsilon_start <= epsilon_end <= 1");
    }
    if (c.minibatch_size == 0) throw ConfigError("minibatch_size must be positive");
    if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (!(c.l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
    if (!(c.keep_prob > 0.0 && c.keep_prob <= 1.0)) throw ConfigError("keep_prob must be in (0, 1]");
    if (c.workers == 0) throw ConfigError("workers must be positive");
}

inline bool uses_dropout(Method m) { return m == Method::dropout || m == Method::dropout_l2; }

/// The classifier architecture a run trains. Dropout layers only appear for
/// the dropout baselines.
inline NetworkSpec policy_spec_for(const TrainConfig& c, const Shape& input_shape, std::size_t classes) {
    const double keep = uses_dropout(c.method) ? c.keep_prob : 1.0;
    if (c.architecture == Architecture::conv) return conv_classifier(input_shape, c.conv_channels, c.dense_hidden, classes, keep);
    return mlp_classifier(shape_size(input_shape), c.hidden, classes, keep);
}

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<double> test_loss;
    double train_acc = 0.0;
    double val_acc = 0.0;
    std::optional<double> test_acc;

    friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct Experience {
    std::size_t state_index = 0;
    std::size_t action = 0;
    double reward = 0.0;
    double v0 = 0.0;  // v(X, pi)
    double v1 = 0.0;  // v(X, pi')

    friend bool operator==(const Experience&, const Experience&) = default;
};

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean eval-mode cross-entropy and argmax accuracy in one pass.
template <class P>
LossAccuracy evaluate(const P& policy, const LabeledDataset& d) {
    if (d.empty()) throw ArgumentError("cannot evaluate on an empty dataset");
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& s : d.samples) {
        const ForwardTrace tr = run_forward(policy.params, policy.spec, s.input.values, Mode::eval);
        const auto p = tr.output();
        loss += -std::log(std::max(p[s.label], kProbabilityFloor));
        correct += argmax(p) == s.label;
    }
    const double n = static_cast<double>(d.size());
    return {loss / n, static_cast<double>(correct) / n};
}

template <class P>
double dataset_loss(const P& policy, const LabeledDataset& d) {
    return evaluate(policy, d).loss;
}

template <class P>
double dataset_accuracy(const P& policy, const LabeledDataset& d) {
    return evaluate(policy, d).accuracy;
}

/// L_pi(T) and L_pi(V) for the frozen policy of one exploration phase.
struct CachedLosses {
    double train = 0.0;
    double validation = 0.0;
};

/// (L_pi(T) - L_pi'(T)) + (L_pi(V) - L_pi'(V)), with the pi side taken from
/// `cached`.
inline double reward(const Policy& policy, const MirrorPolicy& mirror, const LabeledDataset& train,
                     const LabeledDataset& validation, const CachedLosses& cached) {
    if (train.empty() || validation.empty()) throw ArgumentError("reward needs nonempty training and validation sets");
    if (!(policy.spec == mirror.spec)) throw SpecError("mirror and policy have different network specs");
    return (cached.train - dataset_loss(mirror, train)) + (cached.validation - dataset_loss(mirror, validation));
}

/// r + gamma * v(X, pi') - v(X, pi).
inline double advantage(const Experience& e, double gamma) { return e.reward + gamma * e.v1 - e.v0; }

inline EpsilonSchedule epsilon_schedule(const TrainConfig& c) {
    return EpsilonSchedule{c.epsilon_start, c.epsilon_end, c.max_epochs};
}

/// Visit one training sample: sync, sample, tilt, score.
inline Experience explore_sample(const Policy& policy, const ValueNetwork& valuenet, const LabeledDataset& train,
                                 const LabeledDataset& validation, const CachedLosses& cached, double epsilon,
                                 const TrainConfig& config, std::size_t epoch, std::size_t state_index,
                                 MirrorPolicy& mirror) {
    const auto& x = train.samples.at(state_index).input.values;
    Rng rng = make_stream(config.seed, {stream::action, epoch, state_index});

    sync_mirror(mirror, policy);
    const AugmentedState before = augmented_state(policy, x);
    const std::size_t action = sample_action(before.distribution(), epsilon, rng);
    tilt(mirror, x, action, config.tilt_rate);

    Experience e;
    e.state_index = state_index;
    e.action = action;
    e.reward = reward(policy, mirror, train, validation, cached);
    e.v0 = value(valuenet, before);
    e.v1 = value(valuenet, augmented_state(mirror, x));
    if (!std::isfinite(e.reward) || !std::isfinite(e.v0) || !std::isfinite(e.v1)) {
        throw NumericError("non-finite experience");
    }
    return e;
}

/// Exploration phase: one experience per training sample, in a seeded
/// random visit order. Neither the policy nor the value network changes.
///
/// With config.workers > 1 the visits are spread over threads, each with
/// its own mirror. Every visit draws from a stream keyed by
/// (seed, epoch, state index), so the result does not depend on the worker
/// count.
inline std::vector<Experience> explore_epoch(const Policy& policy, const ValueNetwork& valuenet,
                                             const LabeledDataset& train, const LabeledDataset& validation,
                                             double epsilon, const TrainConfig& config, std::size_t epoch) {
    if (train.empty() || validation.empty()) throw ArgumentError("exploration needs nonempty training and validation sets");
    const CachedLosses cached{dataset_loss(policy, train), dataset_loss(policy, validation)};

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = make_stream(config.seed, {stream::visit_order, epoch});
    std::shuffle(order.begin(), order.end(), order_rng);

    std::vector<Experience> out(order.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        MirrorPolicy mirror = MirrorPolicy::of(policy);
        for (std::size_t i = begin; i < end; ++i) {
            out[i] = explore_sample(policy, valuenet, train, validation, cached, epsilon, config, epoch, order[i], mirror);
        }
    };

    const std::size_t workers = std::min(config.workers, order.size());
    if (workers <= 1) {
        run_range(0, order.size());
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        const std::size_t chunk = (order.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk, e = std::min(order.size(), b + chunk);
            threads.emplace_back([&, w, b, e] {
                try {
                    run_range(b, e);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return out;
}

/// Seeded permutation of [0, n) cut into ceil(n / size) consecutive batches.
inline std::vector<std::vector<std::size_t>> make_minibatches(std::size_t n, std::size_t size, Rng& rng) {
    if (size == 0) throw ArgumentError("minibatch size must be positive");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += size) {
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                             perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + size)));
    }
    return batches;
}

/// Ascent direction of the combined policy objective for one minibatch:
/// mean over the batch of
///   w * A * grad log pi(X, y) + c * s * grad log pi(X, y_true),
/// with w = reinforced_term_weight and s = 1 or A depending on the
/// supervised term weighting.
inline Gradients policy_update_grad(const Policy& policy, std::span<const Experience> batch,
                                    const LabeledDataset& train, const TrainConfig& config) {
    if (batch.empty()) throw ArgumentError("policy update needs a nonempty minibatch");
    Gradients g = policy.params.zeros_like();
    for (const auto& e : batch) {
        const auto& s = train.samples.at(e.state_index);
        const double a = advantage(e, config.gamma);
        const double rl_weight = config.reinforced_term_weight * a;
        const double sup_weight =
            config.supervised_damping *
            (config.supervised_term_weighting == SupervisedTermWeighting::advantage ? a : 1.0);
        accumulate_log_prob_grad(policy.params, policy.spec, s.input.values, e.action, rl_weight, g);
        accumulate_log_prob_grad(policy.params, policy.spec, s.input.values, s.label, sup_weight, g);
    }
    scale_in_place(g, 1.0 / static_cast<double>(batch.size()));
    for (const auto& t : g) check_finite(t.tensor.values, "policy gradient");
    return g;
}

/// Value step toward r + gamma * v(X, pi') on the current policy's
/// augmented states, then the combined policy ascent step.
inline void update_minibatch(Policy& policy, ValueNetwork& valuenet, std::span<const Experience> batch,
                             const LabeledDataset& train, const TrainConfig& config) {
    std::vector<ValueTarget> targets;
    targets.reserve(batch.size());
    for (const auto& e : batch) {
        targets.push_back({augmented_state(policy, train.samples.at(e.state_index).input.values),
                           e.reward + config.gamma * e.v1});
    }
    value_update(valuenet, targets, config.value_rate);

    const Gradients g = policy_update_grad(policy, batch, train, config);
    sgd_step(policy.params, g, config.policy_rate, Direction::ascent);
}

/// Update phase over all experiences of an epoch.
inline void update_epoch(Policy& policy, ValueNetwork& valuenet, std::span<const Experience> experiences,
                         const LabeledDataset& train, const TrainConfig& config, std::size_t epoch) {
    if (experiences.empty()) throw ArgumentError("update phase needs experiences");
    Rng rng = make_stream(config.seed, {stream::minibatch, epoch});
    for (const auto& idx : make_minibatches(experiences.size(), config.minibatch_size, rng)) {
        std::vector<Experience> batch;
        batch.reserve(idx.size());
        for (auto i : idx) batch.push_back(experiences[i]);
        update_minibatch(policy, valuenet, batch, train, config);
    }
}

/// One cross-entropy descent step on the given training indices, with
/// dropout masks from `dropout_rng` and the L2 penalty when configured.
inline void supervised_minibatch_step(Policy& policy, const LabeledDataset& train, std::span<const std::size_t> indices,
                                      const TrainConfig& config, Rng& dropout_rng) {
    if (indices.empty()) throw ArgumentError("supervised step needs a nonempty minibatch");
    Gradients g = policy.params.zeros_like();
    for (auto i : indices) {
        const auto& s = train.samples.at(i);
        accumulate_log_prob_grad(policy.params, policy.spec, s.input.values, s.label, -1.0, g, Mode::train,
                                 &dropout_rng);
    }
    scale_in_place(g, 1.0 / static_cast<double>(indices.size()));
    if (config.method == Method::dropout_l2 && config.l2_lambda > 0.0) {
        axpy(g, l2_penalty_grads(policy.params, config.l2_lambda), 1.0);
    }
    for (const auto& t : g) check_finite(t.tensor.values, "supervised gradient");
    sgd_step(policy.params, g, config.supervised_rate, Direction::descent);
}

inline void supervised_epoch(Policy& policy, const LabeledDataset& train, const TrainConfig& config,
                             std::size_t epoch) {
    Rng batch_rng = make_stream(config.seed, {stream::minibatch, epoch});
    Rng dropout_rng = make_stream(config.seed, {stream::dropout, epoch});
    for (const auto& idx : make_minibatches(train.size(), config.minibatch_size, batch_rng)) {
        supervised_minibatch_step(policy, train, idx, config, dropout_rng);
    }
}

inline EpochMetrics measure(const Policy& policy, const Split& split, std::size_t epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    const auto tr = evaluate(policy, split.train);
    const auto va = evaluate(policy, split.validation);
    m.train_loss = tr.loss;
    m.train_acc = tr.accuracy;
    m.val_loss = va.loss;
    m.val_acc = va.accuracy;
    if (!split.test.empty()) {
        const auto te = evaluate(policy, split.test);
        m.test_loss = te.loss;
        m.test_acc = te.accuracy;
    }
    return m;
}

/// Epoch with the highest validation accuracy; ties go to the earliest.
inline std::size_t select_optimal_epoch(std::span<const EpochMetrics> history) {
    if (history.empty()) throw ArgumentError("empty training history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].val_acc > history[best].val_acc) best = i;
    }
    return best;
}

struct TrainResult {
    Policy policy;                       // after the last epoch
    std::optional<ValueNetwork> value;   // reinforced runs only
    ParameterSet optimal_params;         // checkpoint at the optimal epoch
    std::size_t optimal_epoch = 0;
    std::vector<EpochMetrics> history;
};

namespace detail {

inline void check_split(const Split& split, const NetworkSpec& spec) {
    if (split.train.empty() || split.validation.empty()) throw ArgumentError("training needs nonempty train and validation sets");
    for (const LabeledDataset* d : {&split.train, &split.validation, &split.test}) {
        if (!d->empty() && d->input_shape != split.train.input_shape) throw ShapeError("split parts have different input shapes");
    }
    (void)spec;
}

inline void record(TrainResult& r, const Policy& policy, const Split& split, std::size_t epoch) {
    r.history.push_back(measure(policy, split, epoch));
    if (r.history.size() == 1 || r.history.back().val_acc > r.history[r.optimal_epoch].val_acc) {
        r.optimal_epoch = epoch;
        r.optimal_params = policy.params;
    }
}

}  // namespace detail

/// The reinforced classifier: K epochs of exploration + update.
inline TrainResult train_reinforced(const Split& split, const TrainConfig& config) {
    validate(config);
    if (config.method != Method::reinforced) throw ConfigError("train_reinforced needs method = reinforced");
    const auto spec = policy_spec_for(config, split.train.input_shape, split.train.num_classes);
    detail::check_split(split, spec);

    TrainResult r{Policy::create(spec, config.seed), std::nullopt, {}, 0, {}};
    r.value = ValueNetwork::create(augmented_width(spec), derive_seed(config.seed, {stream::init_value}),
                                   config.value_hidden);
    const auto schedule = epsilon_schedule(config);
    for (std::size_t k = 0; k < config.max_epochs; ++k) {
        const double eps = epsilon_at(schedule, k);
        const auto experiences = explore_epoch(r.policy, *r.value, split.train, split.validation, eps, config, k);
        update_epoch(r.policy, *r.value, experiences, split.train, config, k);
        detail::record(r, r.policy, split, k);
    }
    return r;
}

/// Minibatch cross-entropy SGD, optionally with dropout and L2.
inline TrainResult train_supervised(const Split& split, const TrainConfig& config) {
    validate(config);
    if (config.method == Method::reinforced) throw ConfigError("train_supervised needs a supervised method");
    const auto spec = policy_spec_for(config, split.train.input_shape, split.train.num_classes);
    detail::check_split(split, spec);

    TrainResult r{Policy::create(spec, config.seed), std::nullopt, {}, 0, {}};
    for (std::size_t k = 0; k < config.max_epochs; ++k) {
        supervised_epoch(r.policy, split.train, config, k);
        detail::record(r, r.policy, split, k);
    }
    return r;
}

inline TrainResult train(const Split& split, const TrainConfig& config) {
    return config.method == Method::reinforced ? train_reinforced(split, config) : train_supervised(split, config);
}

}  // namespace rcl
