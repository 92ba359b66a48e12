#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcl/error.hpp"

namespace rcl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

inline void check_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
    }
}

/// Dense row-major array of doubles with a same-shaped gradient buffer.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)), values(shape_size(shape), 0.0), grad(values.size(), 0.0) {
        for (auto d : shape) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
        }
    }

    Tensor(Shape s, std::vector<double> v) : Tensor(std::move(s)) {
        if (v.size() != values.size()) {
            throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(values.size()) +
                             " values, got " + std::to_string(v.size()));
        }
        values = std::move(v);
    }

    std::size_t size() const noexcept { return values.size(); }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.values == b.values;
    }
};

struct NamedTensor {
    std::string name;
    Tensor tensor;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered, named collection of parameter tensors.
///
/// Also used to carry gradients: a gradient set has the same names and
/// shapes as the parameters it belongs to, with the gradient in `values`.
class ParameterSet {
public:
    ParameterSet() = default;

    void add(std::string name, Tensor t) {
        for (const auto& e : entries_) {
            if (e.name == name) throw SpecError("duplicate parameter name '" + name + "'");
        }
        entries_.push_back({std::move(name), std::move(t)});
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    NamedTensor& operator[](std::size_t i) { return entries_[i]; }
    const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    const Tensor& at(const std::string& name) const {
        for (const auto& e : entries_) {
            if (e.name == name) return e.tensor;
        }
        throw ArgumentError("no parameter named '" + name + "'");
    }
    Tensor& at(const std::string& name) {
        return const_cast<Tensor&>(std::as_const(*this).at(name));
    }

    /// Same names, same order, same shapes.
    bool compatible(const ParameterSet& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name != other.entries_[i].name) return false;
            if (entries_[i].tensor.shape != other.entries_[i].tensor.shape) return false;
        }
        return true;
    }

    /// Zero-valued set with the same layout.
    ParameterSet zeros_like() const {
        ParameterSet z;
        for (const auto& e : entries_) z.entries_.push_back({e.name, Tensor(e.tensor.shape)});
        return z;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::vector<NamedTensor> entries_;
};

using Gradients = ParameterSet;

inline void require_compatible(const ParameterSet& a, const ParameterSet& b, const char* what) {
    if (!a.compatible(b)) throw ShapeError(std::string(what) + ": parameter sets are not shape-compatible");
}

/// a += scale * b
inline void axpy(ParameterSet& a, const ParameterSet& b, double scale) {
    require_compatible(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& av = a[i].tensor.values;
        const auto& bv = b[i].tensor.values;
        for (std::size_t j = 0; j < av.size(); ++j) av[j] += scale * bv[j];
    }
}

inline void scale_in_place(ParameterSet& a, double scale) {
    for (auto& e : a) {
        for (auto& v : e.tensor.values) v *= scale;
    }
}

inline double squared_norm(const ParameterSet& a) {
    double s = 0.0;
    for (const auto& e : a) {
        for (double v : e.tensor.values) s += v * v;
    }
    return s;
}

inline std::vector<double> flatten_values(const ParameterSet& a) {
    std::vector<double> out;
    out.reserve(a.scalar_count());
    for (const auto& e : a) out.insert(out.end(), e.tensor.values.begin(), e.tensor.values.end());
    return out;
}

}  // namespace rcl
