#pragma once

#include <cstddef>
#include <vector>

#include "rcl/network.hpp"

namespace rcl {

/// Fully connected classifier: (dense, relu[, dropout]) per hidden width,
/// then dense to the class logits and the softmax head. Dropout layers are
/// only inserted when keep_prob < 1.
inline NetworkSpec mlp_classifier(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                  std::size_t classes, double keep_prob = 1.0) {
    NetworkSpec spec{{input_dim}, {}};
    std::size_t width = input_dim;
    for (auto h : hidden) {
        spec.layers.push_back(layer::Dense{width, h});
        spec.layers.push_back(layer::Relu{});
        if (keep_prob < 1.0) spec.layers.push_back(layer::Dropout{keep_prob});
        width = h;
    }
    spec.layers.push_back(layer::Dense{width, classes});
    spec.layers.push_back(layer::SoftmaxHead{classes});
    validate(spec);
    return spec;
}

/// Convolutional classifier in the conv-relu-pool style: one
/// (conv2d, relu, maxpool2d) block per entry of `channels`, then flatten and
/// two fully connected layers with a softmax head.
inline NetworkSpec conv_classifier(const Shape& input_hwc, const std::vector<std::size_t>& channels,
                                   std::size_t dense_hidden, std::size_t classes, double keep_prob = 1.0) {
    if (input_hwc.size() != 3) throw SpecError("conv classifier needs an H,W,C input shape");
    NetworkSpec spec{input_hwc, {}};
    std::size_t c = input_hwc[2];
    for (auto out : channels) {
        spec.layers.push_back(layer::Conv2d{c, out});
        spec.layers.push_back(layer::Relu{});
        spec.layers.push_back(layer::MaxPool2d{});
        c = out;
    }
    spec.layers.push_back(layer::Flatten{});
    const std::size_t features = infer_dims(spec).back().size();
    spec.layers.push_back(layer::Dense{features, dense_hidden});
    spec.layers.push_back(layer::Relu{});
    if (keep_prob < 1.0) spec.layers.push_back(layer::Dropout{keep_prob});
    spec.layers.push_back(layer::Dense{dense_hidden, classes});
    spec.layers.push_back(layer::SoftmaxHead{classes});
    validate(spec);
    return spec;
}

inline constexpr std::size_t kValueHidden = 32;

/// Two dense layers with a ReLU between them and one linear output.
inline NetworkSpec value_network_spec(std::size_t input_width, std::size_t hidden = kValueHidden) {
    NetworkSpec spec{{input_width}, {layer::Dense{input_width, hidden}, layer::Relu{}, layer::Dense{hidden, 1}}};
    validate_stack(spec);
    return spec;
}

}  // namespace rcl
