#pragma once

// Feed-forward network engine over a fixed layer vocabulary.
//
// Activations are flat row-major vectors. Image activations use HWC layout,
// so a (H, W, C) tensor element (y, x, c) lives at (y * W + x) * C + c.
// Convolutions are 3x3, stride 1, valid padding; pooling is 2x2, stride 2.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rcl/error.hpp"
#include "rcl/random.hpp"
#include "rcl/tensor.hpp"

namespace rcl {

namespace layer {
struct Dense {
    std::size_t in_dim;
    std::size_t out_dim;
    friend bool operator==(const Dense&, const Dense&) = default;
};
struct Conv2d {
    std::size_t in_channels;
    std::size_t out_channels;
    friend bool operator==(const Conv2d&, const Conv2d&) = default;
};
struct Relu {
    friend bool operator==(const Relu&, const Relu&) = default;
};
struct MaxPool2d {
    friend bool operator==(const MaxPool2d&, const MaxPool2d&) = default;
};
struct Dropout {
    double keep_prob;
    friend bool operator==(const Dropout&, const Dropout&) = default;
};
struct Flatten {
    friend bool operator==(const Flatten&, const Flatten&) = default;
};
struct SoftmaxHead {
    std::size_t num_classes;
    friend bool operator==(const SoftmaxHead&, const SoftmaxHead&) = default;
};
}  // namespace layer

using Layer = std::variant<layer::Dense, layer::Conv2d, layer::Relu, layer::MaxPool2d, layer::Dropout,
                           layer::Flatten, layer::SoftmaxHead>;

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kPoolKernel = 2;
inline constexpr double kProbabilityFloor = 1e-12;

struct NetworkSpec {
    Shape input_shape;
    std::vector<Layer> layers;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

enum class Mode { train, eval };

/// Activation geometry: either a flat vector (image == false, size c) or an
/// H x W x C image.
struct Dims {
    std::size_t h = 1;
    std::size_t w = 1;
    std::size_t c = 0;
    bool image = false;

    std::size_t size() const noexcept { return h * w * c; }
    Shape shape() const { return image ? Shape{h, w, c} : Shape{c}; }
};

namespace detail {

inline Dims dims_of(const Shape& s) {
    if (s.size() == 1) return Dims{1, 1, s[0], false};
    if (s.size() == 3) return Dims{s[0], s[1], s[2], true};
    throw SpecError("input shape must be rank 1 (features) or rank 3 (H,W,C), got " + shape_string(s));
}

inline std::string layer_name(const Layer& l) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, layer::Dense>) return "dense";
            else if constexpr (std::is_same_v<T, layer::Conv2d>) return "conv2d";
            else if constexpr (std::is_same_v<T, layer::Relu>) return "relu";
            else if constexpr (std::is_same_v<T, layer::MaxPool2d>) return "maxpool2d";
            else if constexpr (std::is_same_v<T, layer::Dropout>) return "dropout";
            else if constexpr (std::is_same_v<T, layer::Flatten>) return "flatten";
            else return "softmax-head";
        },
        l);
}

}  // namespace detail

/// Activation geometry before every layer plus the final output
/// (result has layers.size() + 1 entries). Throws SpecError on any
/// dimension inconsistency. Does not check head placement.
inline std::vector<Dims> infer_dims(const NetworkSpec& spec) {
    for (auto d : spec.input_shape) {
        if (d == 0) throw SpecError("input dimensions must be positive");
    }
    std::vector<Dims> dims;
    dims.reserve(spec.layers.size() + 1);
    dims.push_back(detail::dims_of(spec.input_shape));
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Dims cur = dims.back();
        const std::string where = "layer " + std::to_string(i) + " (" + detail::layer_name(spec.layers[i]) + "): ";
        Dims next = std::visit(
            [&](const auto& l) -> Dims {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, layer::Dense>) {
                    if (cur.image) throw SpecError(where + "needs a flat input; insert flatten");
                    if (l.in_dim == 0 || l.out_dim == 0) throw SpecError(where + "dimensions must be positive");
                    if (l.in_dim != cur.c) {
                        throw SpecError(where + "expects " + std::to_string(l.in_dim) + " inputs, receives " +
                                        std::to_string(cur.c));
                    }
                    return Dims{1, 1, l.out_dim, false};
                } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
                    if (!cur.image) throw SpecError(where + "needs an image input");
                    if (l.in_channels == 0 || l.out_channels == 0) throw SpecError(where + "channels must be positive");
                    if (l.in_channels != cur.c) {
                        throw SpecError(where + "expects " + std::to_string(l.in_channels) + " channels, receives " +
                                        std::to_string(cur.c));
                    }
                    if (cur.h < kConvKernel || cur.w < kConvKernel) throw SpecError(where + "input smaller than kernel");
                    return Dims{cur.h - kConvKernel + 1, cur.w - kConvKernel + 1, l.out_channels, true};
                } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
                    if (!cur.image) throw SpecError(where + "needs an image input");
                    if (cur.h < kPoolKernel || cur.w < kPoolKernel) throw SpecError(where + "input smaller than window");
                    return Dims{cur.h / kPoolKernel, cur.w / kPoolKernel, cur.c, true};
                } else if constexpr (std::is_same_v<T, layer::Dropout>) {
                    if (!(l.keep_prob > 0.0 && l.keep_prob <= 1.0)) throw SpecError(where + "keep_prob must be in (0, 1]");
                    return cur;
                } else if constexpr (std::is_same_v<T, layer::Flatten>) {
                    return Dims{1, 1, cur.size(), false};
                } else if constexpr (std::is_same_v<T, layer::SoftmaxHead>) {
                    if (cur.image) throw SpecError(where + "needs a flat input");
                    if (l.num_classes < 2) throw SpecError(where + "needs at least two classes");
                    if (l.num_classes != cur.c) {
                        throw SpecError(where + "declares " + std::to_string(l.num_classes) + " classes, receives " +
                                        std::to_string(cur.c) + " logits");
                    }
                    return cur;
                } else {
                    return cur;  // relu
                }
            },
            spec.layers[i]);
        dims.push_back(next);
    }
    return dims;
}

inline bool has_softmax_head(const NetworkSpec& spec) {
    return !spec.layers.empty() && std::holds_alternative<layer::SoftmaxHead>(spec.layers.back());
}

/// Classifier networks: consistent dimensions and exactly one softmax head,
/// in final position.
inline void validate(const NetworkSpec& spec) {
    infer_dims(spec);
    std::size_t heads = 0;
    for (const auto& l : spec.layers) heads += std::holds_alternative<layer::SoftmaxHead>(l);
    if (heads != 1 || !has_softmax_head(spec)) {
        throw SpecError("a classifier needs exactly one softmax-head, as its final layer");
    }
}

/// Regression stacks (the value network): consistent dimensions, no softmax
/// head, flat output.
inline void validate_stack(const NetworkSpec& spec) {
    auto dims = infer_dims(spec);
    for (const auto& l : spec.layers) {
        if (std::holds_alternative<layer::SoftmaxHead>(l)) throw SpecError("a regression stack has no softmax-head");
    }
    if (dims.back().image) throw SpecError("a regression stack must end with a flat output");
}

inline std::size_t num_classes(const NetworkSpec& spec) {
    if (!has_softmax_head(spec)) throw SpecError("network has no softmax-head");
    return std::get<layer::SoftmaxHead>(spec.layers.back()).num_classes;
}

/// Index of the activation the augmented state reads: the output of the
/// last flatten when there is one (the features after the conv stack),
/// otherwise the input of the last dense layer.
inline std::size_t feature_index(const NetworkSpec& spec) {
    std::optional<std::size_t> last_flatten, last_dense;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (std::holds_alternative<layer::Flatten>(spec.layers[i])) last_flatten = i;
        if (std::holds_alternative<layer::Dense>(spec.layers[i])) last_dense = i;
    }
    if (last_flatten) return *last_flatten + 1;
    if (last_dense) return *last_dense;
    return 0;
}

inline std::size_t feature_width(const NetworkSpec& spec) {
    return infer_dims(spec)[feature_index(spec)].size();
}

namespace detail {

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Number of parameter tensors a layer owns (weight + bias, or none).
inline bool has_params(const Layer& l) {
    return std::holds_alternative<layer::Dense>(l) || std::holds_alternative<layer::Conv2d>(l);
}

}  // namespace detail

/// Deterministic Glorot-uniform weights, zero biases.
///
/// Parameter tensors are named "layer<i>.weight" and "layer<i>.bias", in
/// layer order. Dense weights are (in, out); conv weights are (3, 3, in, out).
inline ParameterSet build_network(const NetworkSpec& spec, std::uint64_t seed) {
    infer_dims(spec);
    Rng rng = make_stream(seed, {stream::init_policy});
    ParameterSet params;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                Shape wshape;
                std::size_t out = 0, fan_in = 0, fan_out = 0;
                if constexpr (std::is_same_v<T, layer::Dense>) {
                    wshape = {l.in_dim, l.out_dim};
                    out = l.out_dim;
                    fan_in = l.in_dim;
                    fan_out = l.out_dim;
                } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
                    wshape = {kConvKernel, kConvKernel, l.in_channels, l.out_channels};
                    out = l.out_channels;
                    fan_in = kConvKernel * kConvKernel * l.in_channels;
                    fan_out = kConvKernel * kConvKernel * l.out_channels;
                } else {
                    return;
                }
                Tensor w(wshape);
                const double a = detail::glorot_limit(fan_in, fan_out);
                std::uniform_real_distribution<double> dist(-a, a);
                for (auto& v : w.values) v = dist(rng);
                params.add(prefix + ".weight", std::move(w));
                params.add(prefix + ".bias", Tensor({out}));
            },
            spec.layers[i]);
    }
    return params;
}

/// Everything backward needs from one forward pass.
struct ForwardTrace {
    /// activations[i] is the input of layer i; activations.back() is the
    /// network output (the distribution for classifiers).
    std::vector<std::vector<double>> activations;
    /// Per-layer inverted-dropout scale factors; empty when the layer acted
    /// as the identity.
    std::vector<std::vector<double>> masks;
    /// Per-layer flat input index of each pooled maximum.
    std::vector<std::vector<std::size_t>> pool_argmax;
    std::size_t feature_layer = 0;

    std::span<const double> features() const { return activations[feature_layer]; }
    std::span<const double> output() const& { return activations.back(); }
    std::vector<double> output() && { return std::move(activations.back()); }
    /// Pre-softmax scores of a classifier.
    std::span<const double> logits() const { return activations[activations.size() - 2]; }
};

struct ForwardResult {
    Tensor distribution;
    ForwardTrace trace;
};

/// Numerically stable softmax (max subtracted before exponentiation).
inline std::vector<double> softmax(std::span<const double> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (double z : logits) m = std::max(m, z);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

namespace detail {

struct ParamCursor {
    const ParameterSet& params;
    std::size_t next = 0;

    const Tensor& take(const Shape& expected) {
        if (next >= params.size()) throw ShapeError("parameter set has too few tensors for the network");
        const Tensor& t = params[next++].tensor;
        if (t.shape != expected) {
            throw ShapeError("parameter '" + params[next - 1].name + "' has shape " + shape_string(t.shape) +
                             ", expected " + shape_string(expected));
        }
        return t;
    }
};

inline void dense_forward(const layer::Dense& l, const Tensor& w, const Tensor& b, std::span<const double> in,
                          std::vector<double>& out) {
    out.assign(b.values.begin(), b.values.end());
    const double* wp = w.values.data();
    for (std::size_t i = 0; i < l.in_dim; ++i) {
        const double xi = in[i];
        if (xi == 0.0) continue;
        const double* row = wp + i * l.out_dim;
        for (std::size_t o = 0; o < l.out_dim; ++o) out[o] += xi * row[o];
    }
}

inline void conv_forward(const layer::Conv2d& l, const Dims& in_d, const Dims& out_d, const Tensor& w,
                         const Tensor& b, std::span<const double> in, std::vector<double>& out) {
    const std::size_t ci = l.in_channels, co = l.out_channels;
    out.assign(out_d.size(), 0.0);
    for (std::size_t oy = 0; oy < out_d.h; ++oy) {
        for (std::size_t ox = 0; ox < out_d.w; ++ox) {
            double* o = out.data() + (oy * out_d.w + ox) * co;
            for (std::size_t k = 0; k < co; ++k) o[k] = b.values[k];
            for (std::size_t dy = 0; dy < kConvKernel; ++dy) {
                for (std::size_t dx = 0; dx < kConvKernel; ++dx) {
                    const double* x = in.data() + ((oy + dy) * in_d.w + (ox + dx)) * ci;
                    const double* wk = w.values.data() + (dy * kConvKernel + dx) * ci * co;
                    for (std::size_t i = 0; i < ci; ++i) {
                        const double xi = x[i];
                        const double* wr = wk + i * co;
                        for (std::size_t k = 0; k < co; ++k) o[k] += xi * wr[k];
                    }
                }
            }
        }
    }
}

inline void pool_forward(const Dims& in_d, const Dims& out_d, std::span<const double> in, std::vector<double>& out,
                         std::vector<std::size_t>& argmax) {
    out.assign(out_d.size(), 0.0);
    argmax.assign(out_d.size(), 0);
    const std::size_t c = in_d.c;
    for (std::size_t oy = 0; oy < out_d.h; ++oy) {
        for (std::size_t ox = 0; ox < out_d.w; ++ox) {
            for (std::size_t k = 0; k < c; ++k) {
                std::size_t best = ((2 * oy) * in_d.w + 2 * ox) * c + k;
                for (std::size_t dy = 0; dy < kPoolKernel; ++dy) {
                    for (std::size_t dx = 0; dx < kPoolKernel; ++dx) {
                        const std::size_t idx = ((2 * oy + dy) * in_d.w + (2 * ox + dx)) * c + k;
                        if (in[idx] > in[best]) best = idx;
                    }
                }
                const std::size_t oi = (oy * out_d.w + ox) * c + k;
                out[oi] = in[best];
                argmax[oi] = best;
            }
        }
    }
}

}  // namespace detail

/// Runs the network on a flat input.
///
/// In train mode dropout layers sample inverted-dropout masks from `rng`
/// (required unless every dropout layer keeps everything); in eval mode
/// dropout is the identity.
inline ForwardTrace run_forward(const ParameterSet& params, const NetworkSpec& spec, std::span<const double> input,
                                Mode mode = Mode::eval, Rng* rng = nullptr) {
    const auto dims = infer_dims(spec);
    if (input.size() != dims.front().size()) {
        throw ShapeError("input has " + std::to_string(input.size()) + " values, network expects " +
                         shape_string(spec.input_shape));
    }
    const std::size_t n = spec.layers.size();
    ForwardTrace tr;
    tr.activations.resize(n + 1);
    tr.masks.resize(n);
    tr.pool_argmax.resize(n);
    tr.feature_layer = feature_index(spec);
    tr.activations[0].assign(input.begin(), input.end());

    detail::ParamCursor cursor{params};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& in = tr.activations[i];
        auto& out = tr.activations[i + 1];
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, layer::Dense>) {
                    const Tensor& w = cursor.take({l.in_dim, l.out_dim});
                    const Tensor& b = cursor.take({l.out_dim});
                    detail::dense_forward(l, w, b, in, out);
                } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
                    const Tensor& w = cursor.take({kConvKernel, kConvKernel, l.in_channels, l.out_channels});
                    const Tensor& b = cursor.take({l.out_channels});
                    detail::conv_forward(l, dims[i], dims[i + 1], w, b, in, out);
                } else if constexpr (std::is_same_v<T, layer::Relu>) {
                    out.resize(in.size());
                    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
                } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
                    detail::pool_forward(dims[i], dims[i + 1], in, out, tr.pool_argmax[i]);
                } else if constexpr (std::is_same_v<T, layer::Dropout>) {
                    out = in;
                    if (mode == Mode::train && l.keep_prob < 1.0) {
                        if (rng == nullptr) throw ArgumentError("train-mode dropout needs a random generator");
                        auto& mask = tr.masks[i];
                        mask.resize(in.size());
                        const double scale = 1.0 / l.keep_prob;
                        for (std::size_t j = 0; j < in.size(); ++j) {
                            mask[j] = uniform01(*rng) < l.keep_prob ? scale : 0.0;
                            out[j] = in[j] * mask[j];
                        }
                    }
                } else if constexpr (std::is_same_v<T, layer::Flatten>) {
                    out = in;
                } else {
                    out = softmax(in);
                }
            },
            spec.layers[i]);
        check_finite(out, "forward activation");
    }
    if (cursor.next != params.size()) throw ShapeError("parameter set has more tensors than the network uses");
    return tr;
}

inline ForwardResult forward(const ParameterSet& params, const NetworkSpec& spec, const Tensor& input,
                             Mode mode = Mode::eval, Rng* rng = nullptr) {
    if (input.shape != spec.input_shape) {
        throw ShapeError("input shape " + shape_string(input.shape) + " does not match network input " +
                         shape_string(spec.input_shape));
    }
    ForwardResult r;
    r.trace = run_forward(params, spec, input.values, mode, rng);
    const auto& out = r.trace.output();
    r.distribution = Tensor({out.size()}, {out.begin(), out.end()});
    return r;
}

/// Recomputes layer `i` from the cached input in `trace`, reusing the
/// recorded dropout mask.
inline std::vector<double> replay_layer(const ParameterSet& params, const NetworkSpec& spec, const ForwardTrace& trace,
                                        std::size_t i) {
    const auto dims = infer_dims(spec);
    detail::ParamCursor cursor{params};
    for (std::size_t j = 0; j < i; ++j) {
        if (std::holds_alternative<layer::Dense>(spec.layers[j]) || std::holds_alternative<layer::Conv2d>(spec.layers[j]))
            cursor.next += 2;
    }
    const auto& in = trace.activations[i];
    std::vector<double> out;
    std::vector<std::size_t> argmax;
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, layer::Dense>) {
                const Tensor& w = cursor.take({l.in_dim, l.out_dim});
                const Tensor& b = cursor.take({l.out_dim});
                detail::dense_forward(l, w, b, in, out);
            } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
                const Tensor& w = cursor.take({kConvKernel, kConvKernel, l.in_channels, l.out_channels});
                const Tensor& b = cursor.take({l.out_channels});
                detail::conv_forward(l, dims[i], dims[i + 1], w, b, in, out);
            } else if constexpr (std::is_same_v<T, layer::Relu>) {
                out.resize(in.size());
                for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
            } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
                detail::pool_forward(dims[i], dims[i + 1], in, out, argmax);
            } else if constexpr (std::is_same_v<T, layer::Dropout>) {
                out = in;
                const auto& mask = trace.masks[i];
                if (!mask.empty()) {
                    for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] * mask[j];
                }
            } else if constexpr (std::is_same_v<T, layer::Flatten>) {
                out = in;
            } else {
                out = softmax(in);
            }
        },
        spec.layers[i]);
    return out;
}

/// Accumulates scale * d(objective)/d(params) into `grads`, given the
/// gradient of the objective with respect to the output of the last
/// non-head layer (the logits, for classifiers).
inline void backward(const ParameterSet& params, const NetworkSpec& spec, const ForwardTrace& trace,
                     std::span<const double> d_out, Gradients& grads, double scale = 1.0) {
    const auto dims = infer_dims(spec);
    const std::size_t n_body = has_softmax_head(spec) ? spec.layers.size() - 1 : spec.layers.size();
    if (d_out.size() != dims[n_body].size()) throw ShapeError("backward: output gradient has the wrong width");
    require_compatible(params, grads, "backward");

    // Parameter tensor index of each layer's weight.
    std::vector<std::size_t> param_at(spec.layers.size(), 0);
    {
        std::size_t k = 0;
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            param_at[i] = k;
            if (detail::has_params(spec.layers[i])) k += 2;
        }
    }

    std::vector<double> d(d_out.begin(), d_out.end());
    for (double& v : d) v *= scale;
    std::vector<double> d_in;

    for (std::size_t ii = n_body; ii-- > 0;) {
        const auto& in = trace.activations[ii];
        const bool need_input_grad = ii > 0;
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, layer::Dense>) {
                    const auto& w = params[param_at[ii]].tensor.values;
                    auto& gw = grads[param_at[ii]].tensor.values;
                    auto& gb = grads[param_at[ii] + 1].tensor.values;
                    for (std::size_t o = 0; o < l.out_dim; ++o) gb[o] += d[o];
                    d_in.assign(need_input_grad ? l.in_dim : 0, 0.0);
                    for (std::size_t i = 0; i < l.in_dim; ++i) {
                        const double xi = in[i];
                        double* grow = gw.data() + i * l.out_dim;
                        const double* wrow = w.data() + i * l.out_dim;
                        double acc = 0.0;
                        for (std::size_t o = 0; o < l.out_dim; ++o) {
                            grow[o] += xi * d[o];
                            acc += wrow[o] * d[o];
                        }
                        if (need_input_grad) d_in[i] = acc;
                    }
                } else if constexpr (std::is_same_v<T, layer::Conv2d>) {
                    const Dims& id = dims[ii];
                    const Dims& od = dims[ii + 1];
                    const std::size_t ci = l.in_channels, co = l.out_channels;
                    const auto& w = params[param_at[ii]].tensor.values;
                    auto& gw = grads[param_at[ii]].tensor.values;
                    auto& gb = grads[param_at[ii] + 1].tensor.values;
                    d_in.assign(need_input_grad ? id.size() : 0, 0.0);
                    for (std::size_t oy = 0; oy < od.h; ++oy) {
                        for (std::size_t ox = 0; ox < od.w; ++ox) {
                            const double* g = d.data() + (oy * od.w + ox) * co;
                            for (std::size_t k = 0; k < co; ++k) gb[k] += g[k];
                            for (std::size_t dy = 0; dy < kConvKernel; ++dy) {
                                for (std::size_t dx = 0; dx < kConvKernel; ++dx) {
                                    const std::size_t base = ((oy + dy) * id.w + (ox + dx)) * ci;
                                    const std::size_t wbase = (dy * kConvKernel + dx) * ci * co;
                                    for (std::size_t i = 0; i < ci; ++i) {
                                        const double xi = in[base + i];
                                        double* gwr = gw.data() + wbase + i * co;
                                        const double* wr = w.data() + wbase + i * co;
                                        double acc = 0.0;
                                        for (std::size_t k = 0; k < co; ++k) {
                                            gwr[k] += xi * g[k];
                                            acc += wr[k] * g[k];
                                        }
                                        if (need_input_grad) d_in[base + i] += acc;
                                    }
                                }
                            }
                        }
                    }
                } else if constexpr (std::is_same_v<T, layer::Relu>) {
                    d_in.resize(in.size());
                    for (std::size_t j = 0; j < in.size(); ++j) d_in[j] = in[j] > 0.0 ? d[j] : 0.0;
                } else if constexpr (std::is_same_v<T, layer::MaxPool2d>) {
                    d_in.assign(in.size(), 0.0);
                    const auto& am = trace.pool_argmax[ii];
                    for (std::size_t j = 0; j < am.size(); ++j) d_in[am[j]] += d[j];
                } else if constexpr (std::is_same_v<T, layer::Dropout>) {
                    d_in = d;
                    const auto& mask = trace.masks[ii];
                    if (!mask.empty()) {
                        for (std::size_t j = 0; j < d_in.size(); ++j) d_in[j] *= mask[j];
                    }
                } else if constexpr (std::is_same_v<T, layer::Flatten>) {
                    d_in = d;
                } else {
                    throw SpecError("softmax-head must be the final layer");
                }
            },
            spec.layers[ii]);
        std::swap(d, d_in);
    }
}

/// -log(distribution[label]), with the probability floored at 1e-12.
inline double cross_entropy(std::span<const double> distribution, std::size_t label) {
    if (label >= distribution.size()) {
        throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(distribution.size()) + " classes");
    }
    double sum = 0.0;
    for (double p : distribution) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("cross_entropy: distribution does not sum to 1");
    return -std::log(std::max(distribution[label], kProbabilityFloor));
}

inline double cross_entropy(const Tensor& distribution, std::size_t label) {
    return cross_entropy(std::span<const double>(distribution.values), label);
}

/// One element of a weighted log-probability objective.
struct WeightedExample {
    std::span<const double> input;
    std::size_t cls;
    double weight;
};

/// Accumulates weight * d log pi(input, cls) / d params into `grads` (a sum,
/// not a mean). Returns log pi(input, cls) at the floored probability.
inline double accumulate_log_prob_grad(const ParameterSet& params, const NetworkSpec& spec,
                                       std::span<const double> input, std::size_t cls, double weight,
                                       Gradients& grads, Mode mode = Mode::eval, Rng* rng = nullptr) {
    const std::size_t c = num_classes(spec);
    if (cls >= c) throw ArgumentError("class " + std::to_string(cls) + " out of range for " + std::to_string(c) + " classes");
    const ForwardTrace tr = run_forward(params, spec, input, mode, rng);
    const auto p = tr.output();
    const double logp = std::log(std::max(p[cls], kProbabilityFloor));
    if (weight == 0.0) return logp;
    // d log softmax_y / d z_k = [k == y] - p_k; zero where the floor is active.
    if (p[cls] < kProbabilityFloor) return logp;
    std::vector<double> dz(c);
    for (std::size_t k = 0; k < c; ++k) dz[k] = (k == cls ? 1.0 : 0.0) - p[k];
    backward(params, spec, tr, dz, grads, weight);
    return logp;
}

/// Gradient of the batch mean of weight * log pi(input, cls).
inline Gradients grad_weighted_log_prob(const ParameterSet& params, const NetworkSpec& spec,
                                        std::span<const WeightedExample> batch, Mode mode = Mode::eval,
                                        Rng* rng = nullptr) {
    if (batch.empty()) throw ArgumentError("grad_weighted_log_prob: empty batch");
    Gradients g = params.zeros_like();
    for (const auto& ex : batch) accumulate_log_prob_grad(params, spec, ex.input, ex.cls, ex.weight, g, mode, rng);
    scale_in_place(g, 1.0 / static_cast<double>(batch.size()));
    for (const auto& e : g) check_finite(e.tensor.values, "log-probability gradient");
    return g;
}

enum class Direction { ascent, descent };

/// params <- params +/- rate * grads. Gradient buffers are left alone.
inline void sgd_step(ParameterSet& params, const Gradients& grads, double rate, Direction direction) {
    require_compatible(params, grads, "sgd_step");
    axpy(params, grads, direction == Direction::ascent ? rate : -rate);
}

inline ParameterSet snapshot(const ParameterSet& params) { return params; }

inline void restore(ParameterSet& params, const ParameterSet& snap) {
    require_compatible(params, snap, "restore");
    params = snap;
}

/// lambda * theta for weight tensors; biases get no penalty.
inline Gradients l2_penalty_grads(const ParameterSet& params, double lambda) {
    if (lambda < 0.0) throw ArgumentError("l2 lambda must be non-negative");
    Gradients g = params.zeros_like();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& name = params[i].name;
        if (!name.ends_with(".weight")) continue;
        const auto& v = params[i].tensor.values;
        auto& gv = g[i].tensor.values;
        for (std::size_t j = 0; j < v.size(); ++j) gv[j] = lambda * v[j];
    }
    return g;
}

}  // namespace rcl
