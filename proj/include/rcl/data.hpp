#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rcl/error.hpp"
#include "rcl/random.hpp"
#include "rcl/tensor.hpp"

namespace rcl {

struct Sample {
    Tensor input;
    std::size_t label = 0;
};

struct LabeledDataset {
    std::string name;
    std::size_t num_classes = 0;
    Shape input_shape;
    std::vector<Sample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes, 0);
        for (const auto& s : samples) ++counts.at(s.label);
        return counts;
    }
};

/// Labels in range, one shared input shape, every class present.
inline void validate(const LabeledDataset& d) {
    if (d.num_classes == 0) throw ArgumentError("dataset '" + d.name + "' declares no classes");
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const auto& s = d.samples[i];
        if (s.label >= d.num_classes) throw ArgumentError("sample " + std::to_string(i) + " has label out of range");
        if (s.input.shape != d.input_shape) throw ShapeError("sample " + std::to_string(i) + " has a different shape");
    }
    const auto counts = d.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw ArgumentError("class " + std::to_string(k) + " has no samples");
    }
}

/// Train (T), validation (V) and test partitions of one dataset. The test
/// part is empty when the test set is withheld.
struct Split {
    LabeledDataset train;
    LabeledDataset validation;
    LabeledDataset test;
    std::uint64_t seed = 0;
};

enum class Family { blobs, rings, textured_patches };

inline Family parse_family(std::string_view s) {
    if (s == "blobs") return Family::blobs;
    if (s == "rings") return Family::rings;
    if (s == "textured-patches") return Family::textured_patches;
    throw ArgumentError("unsupported dataset family '" + std::string(s) + "'");
}

inline std::string to_string(Family f) {
    switch (f) {
        case Family::blobs: return "blobs";
        case Family::rings: return "rings";
        case Family::textured_patches: return "textured-patches";
    }
    return "?";
}

/// Deterministic synthetic classification data.
///
///  - blobs: one Gaussian cluster per class around a random centre drawn
///    from N(0, I); `noise` is the per-feature standard deviation.
///  - rings: concentric circles of radius 1 + class in the first two
///    features; `noise` perturbs every feature. Needs >= 2 features.
///  - textured-patches: H x W x C images holding a sinusoidal grating whose
///    orientation encodes the class (random phase per sample), plus pixel
///    noise. Needs H, W >= 4.
///
/// Samples are ordered by class.
inline LabeledDataset generate_synthetic(Family family, const std::vector<std::size_t>& class_counts,
                                         const Shape& input_shape, double noise, std::uint64_t seed) {
    if (class_counts.empty()) throw ArgumentError("class_counts must not be empty");
    for (auto c : class_counts) {
        if (c == 0) throw ArgumentError("every class needs at least one sample");
    }
    if (!(noise >= 0.0)) throw ArgumentError("noise must be non-negative");
    if (input_shape.empty()) throw ArgumentError("input shape must not be empty");
    for (auto d : input_shape) {
        if (d == 0) throw ArgumentError("input dimensions must be positive");
    }

    const std::size_t classes = class_counts.size();
    const std::size_t dim = shape_size(input_shape);
    LabeledDataset out{to_string(family), classes, input_shape, {}};
    std::normal_distribution<double> gauss(0.0, 1.0);

    switch (family) {
        case Family::blobs: {
            Rng centre_rng = make_stream(seed, {stream::generate, 0});
            std::vector<std::vector<double>> centres(classes, std::vector<double>(dim));
            for (auto& c : centres) {
                for (auto& v : c) v = gauss(centre_rng);
            }
            for (std::size_t k = 0; k < classes; ++k) {
                Rng rng = make_stream(seed, {stream::generate, 1, k});
                for (std::size_t i = 0; i < class_counts[k]; ++i) {
                    Tensor x(input_shape);
                    for (std::size_t j = 0; j < dim; ++j) x[j] = centres[k][j] + noise * gauss(rng);
                    out.samples.push_back({std::move(x), k});
                }
            }
            break;
        }
        case Family::rings: {
            if (input_shape.size() != 1 || dim < 2) throw ArgumentError("rings need a flat shape with >= 2 features");
            for (std::size_t k = 0; k < classes; ++k) {
                Rng rng = make_stream(seed, {stream::generate, 2, k});
                const double radius = 1.0 + static_cast<double>(k);
                for (std::size_t i = 0; i < class_counts[k]; ++i) {
                    Tensor x(input_shape);
                    const double angle = 2.0 * std::numbers::pi * uniform01(rng);
                    x[0] = radius * std::cos(angle);
                    x[1] = radius * std::sin(angle);
                    for (std::size_t j = 0; j < dim; ++j) x[j] += noise * gauss(rng);
                    out.samples.push_back({std::move(x), k});
                }
            }
            break;
        }
        case Family::textured_patches: {
            if (input_shape.size() != 3 || input_shape[0] < 4 || input_shape[1] < 4) {
                throw ArgumentError("textured-patches need an H,W,C shape with H, W >= 4");
            }
            const std::size_t h = input_shape[0], w = input_shape[1], ch = input_shape[2];
            constexpr double kWaveNumber = 2.0 * std::numbers::pi / 4.0;  // period of 4 pixels
            for (std::size_t k = 0; k < classes; ++k) {
                Rng rng = make_stream(seed, {stream::generate, 3, k});
                const double theta = std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
                const double cx = std::cos(theta), cy = std::sin(theta);
                for (std::size_t i = 0; i < class_counts[k]; ++i) {
                    Tensor x(input_shape);
                    const double phase = 2.0 * std::numbers::pi * uniform01(rng);
                    for (std::size_t y = 0; y < h; ++y) {
                        for (std::size_t xx = 0; xx < w; ++xx) {
                            const double v = std::sin(kWaveNumber * (static_cast<double>(xx) * cx +
                                                                     static_cast<double>(y) * cy) +
                                                      phase);
                            for (std::size_t c = 0; c < ch; ++c) x[(y * w + xx) * ch + c] = v + noise * gauss(rng);
                        }
                    }
                    out.samples.push_back({std::move(x), k});
                }
            }
            break;
        }
    }
    return out;
}

namespace detail {

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_size(std::string_view s, std::size_t& out) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_view(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

/// Header `label,f0,...,fN`; image-shaped data gets a `# shape=H,W,C` second
/// line. Values use the shortest round-tripping decimal form.
inline void save_csv(const LabeledDataset& d, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    const std::size_t dim = shape_size(d.input_shape);
    os << "label";
    for (std::size_t j = 0; j < dim; ++j) os << ",f" << j;
    os << '\n';
    if (d.input_shape.size() != 1) {
        os << "# shape=";
        for (std::size_t i = 0; i < d.input_shape.size(); ++i) os << (i ? "," : "") << d.input_shape[i];
        os << '\n';
    }
    for (const auto& s : d.samples) {
        os << s.label;
        for (double v : s.input.values) os << ',' << detail::format_double(v);
        os << '\n';
    }
    if (!os) throw Error("write to '" + path.string() + "' failed");
}

inline LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open '" + path.string() + "'");

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(is, line)) throw ParseError("empty file, expected a header", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_view(line, ',');
    if (header.empty() || header[0] != "label") throw ParseError("header must start with 'label'", line_no);
    const std::size_t dim = header.size() - 1;
    if (dim == 0) throw ParseError("header declares no features", line_no);
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[j + 1] != "f" + std::to_string(j)) {
            throw ParseError("header column " + std::to_string(j + 1) + " should be 'f" + std::to_string(j) + "'", line_no);
        }
    }

    LabeledDataset d;
    d.name = path.stem().string();
    d.input_shape = {dim};
    std::size_t max_label = 0;
    bool first_data = true;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.starts_with("#")) {
            constexpr std::string_view key = "# shape=";
            if (line_no == 2 && line.starts_with(key)) {
                Shape s;
                for (auto part : detail::split_view(std::string_view(line).substr(key.size()), ',')) {
                    std::size_t v = 0;
                    if (!detail::parse_size(part, v) || v == 0) throw ParseError("bad shape entry", line_no);
                    s.push_back(v);
                }
                if (shape_size(s) != dim) throw ParseError("shape does not match the feature count", line_no);
                d.input_shape = s;
            }
            continue;
        }
        const auto cells = detail::split_view(line, ',');
        if (cells.size() != dim + 1) {
            throw ParseError("expected " + std::to_string(dim) + " features, found " + std::to_string(cells.size() - 1),
                             line_no);
        }
        std::size_t label = 0;
        if (!detail::parse_size(cells[0], label)) {
            throw ParseError("unknown label value '" + std::string(cells[0]) + "'", line_no);
        }
        Tensor x(d.input_shape);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!detail::parse_double(cells[j + 1], x[j])) {
                throw ParseError("bad feature value '" + std::string(cells[j + 1]) + "'", line_no);
            }
        }
        max_label = first_data ? label : std::max(max_label, label);
        first_data = false;
        d.samples.push_back({std::move(x), label});
    }
    if (d.samples.empty()) throw ParseError("no data rows", line_no);
    d.num_classes = max_label + 1;
    const auto counts = d.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw ParseError("label " + std::to_string(k) + " never occurs", line_no);
    }
    return d;
}

/// Per-class (train, validation, test) sizes for a 3:1:1 split, by largest
/// remainder; ties go to train, then validation, then test.
inline std::array<std::size_t, 3> split_counts_311(std::size_t n) {
    constexpr std::array<std::size_t, 3> ratio{3, 1, 1};
    std::array<std::size_t, 3> counts{};
    std::array<std::size_t, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        counts[i] = n * ratio[i] / 5;
        rem[i] = n * ratio[i] % 5;
        assigned += counts[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i]];
    return counts;
}

/// Per-class 3:1:1 sizes for a whole dataset. Each class is rounded by
/// largest remainder; equal remainders go to the part still short of the
/// dataset-wide 3:1:1 totals, so the part sizes match split_counts_311(n)
/// whenever the per-class rounding allows it.
inline std::vector<std::array<std::size_t, 3>> stratified_counts_311(const std::vector<std::size_t>& class_counts) {
    constexpr std::array<std::size_t, 3> ratio{3, 1, 1};
    std::size_t n = 0;
    for (auto c : class_counts) n += c;
    const auto total = split_counts_311(n);
    std::array<long long, 3> deficit{};
    for (std::size_t p = 0; p < 3; ++p) deficit[p] = static_cast<long long>(total[p]);
    std::vector<std::array<std::size_t, 3>> out(class_counts.size());
    std::vector<std::array<std::size_t, 3>> rem(class_counts.size());
    for (std::size_t k = 0; k < class_counts.size(); ++k) {
        for (std::size_t p = 0; p < 3; ++p) {
            out[k][p] = class_counts[k] * ratio[p] / 5;
            rem[k][p] = class_counts[k] * ratio[p] % 5;
            deficit[p] -= static_cast<long long>(out[k][p]);
        }
    }
    for (std::size_t k = 0; k < class_counts.size(); ++k) {
        std::size_t extra = class_counts[k] - out[k][0] - out[k][1] - out[k][2];
        std::array<bool, 3> used{};
        for (; extra > 0; --extra) {
            std::size_t best = 3;
            for (std::size_t p = 0; p < 3; ++p) {
                if (used[p]) continue;
                if (best == 3 || rem[k][p] > rem[k][best] ||
                    (rem[k][p] == rem[k][best] && deficit[p] > deficit[best])) {
                    best = p;
                }
            }
            used[best] = true;
            ++out[k][best];
            --deficit[best];
        }
    }
    return out;
}

/// Stratified, seeded 3:1:1 partition. Each part keeps the source order.
inline Split split_311(const LabeledDataset& d, std::uint64_t seed) {
    validate(d);
    const auto counts = d.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] < 5) {
            throw ArgumentError("class " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                                " samples; stratified 3:1:1 splitting needs at least 5");
        }
    }
    const auto per_class = stratified_counts_311(counts);
    std::vector<int> part(d.size(), -1);
    for (std::size_t k = 0; k < d.num_classes; ++k) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.samples[i].label == k) idx.push_back(i);
        }
        Rng rng = make_stream(seed, {stream::split, k});
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto& sizes = per_class[k];
        std::size_t pos = 0;
        for (int p = 0; p < 3; ++p) {
            for (std::size_t j = 0; j < sizes[p]; ++j) part[idx[pos++]] = p;
        }
    }
    Split s;
    s.seed = seed;
    LabeledDataset* parts[3] = {&s.train, &s.validation, &s.test};
    const char* suffix[3] = {"/train", "/validation", "/test"};
    for (int p = 0; p < 3; ++p) {
        parts[p]->name = d.name + suffix[p];
        parts[p]->num_classes = d.num_classes;
        parts[p]->input_shape = d.input_shape;
    }
    for (std::size_t i = 0; i < d.size(); ++i) parts[part[i]]->samples.push_back(d.samples[i]);
    return s;
}

}  // namespace rcl
