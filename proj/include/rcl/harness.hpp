#pragma once

// Experiment orchestration behind the command-line tool: dataset
// generation, single training runs with learning curves, multi-split method
// comparisons and report rendering. Every command writes a manifest that is
// itself a valid config for the same command.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rcl/config.hpp"
#include "rcl/data.hpp"
#include "rcl/error.hpp"
#include "rcl/stats.hpp"
#include "rcl/trainer.hpp"

namespace rcl::harness {

namespace fs = std::filesystem;

inline std::string format_number(double v) { return rcl::detail::format_double(v); }

/// Two decimals, as error tables are printed.
inline std::string format_fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline double error_percent(double accuracy) { return 100.0 * (1.0 - accuracy); }

/// "Method,train,val,test" with two-decimal error percentages.
inline std::string table_row(Method m, double train_error, double val_error, std::optional<double> test_error) {
    return display_name(m) + "," + format_fixed2(train_error) + "," + format_fixed2(val_error) + "," +
           (test_error ? format_fixed2(*test_error) : std::string());
}

template <class T>
std::string join(const std::vector<T>& xs, const char* sep = ",") {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? sep : "") << xs[i];
    return os.str();
}

namespace keys {
inline const std::set<std::string> dataset = {"dataset", "family", "class_counts", "shape", "noise", "data_seed", "name"};
inline const std::set<std::string> split = {"split_seed", "withhold_test"};
inline const std::set<std::string> training = {
    "method",        "supervised_rate", "policy_rate",   "tilt_rate",    "value_rate",
    "supervised_damping", "gamma",      "epsilon_start", "epsilon_end",  "minibatch_size",
    "max_epochs",    "seed",            "l2_lambda",     "keep_prob",    "supervised_term_weighting",
    "workers",       "architecture",    "hidden",        "conv_channels", "dense_hidden",
    "value_hidden"};
inline const std::set<std::string> compare = {"methods", "splits", "permutation_iterations", "permutation_seed"};

inline std::set<std::string> merged(std::initializer_list<const std::set<std::string>*> sets) {
    std::set<std::string> out;
    for (auto* s : sets) out.insert(s->begin(), s->end());
    return out;
}
}  // namespace keys

/// Ordered key=value lines; written as a manifest.
using Entries = std::vector<std::pair<std::string, std::string>>;

inline void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw Error("write to '" + path.string() + "' failed");
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_manifest(const fs::path& path, const Entries& entries) {
    std::ostringstream os;
    for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
    write_text_file(path, os.str());
}

// ---------------------------------------------------------------- datasets

struct DatasetDescriptor {
    std::optional<fs::path> file;  // absolute, when loading from CSV
    Family family = Family::blobs;
    std::vector<std::size_t> class_counts = {20, 20, 20};
    Shape shape = {16};
    double noise = 1.0;
    std::uint64_t data_seed = 0;
    std::string name;

    Entries entries() const {
        if (file) return {{"dataset", file->string()}};
        std::vector<std::uint64_t> counts(class_counts.begin(), class_counts.end());
        std::vector<std::uint64_t> dims(shape.begin(), shape.end());
        Entries e{{"family", to_string(family)},
                  {"class_counts", join(counts)},
                  {"shape", join(dims)},
                  {"noise", format_number(noise)},
                  {"data_seed", std::to_string(data_seed)}};
        if (!name.empty()) e.emplace_back("name", name);
        return e;
    }

    LabeledDataset materialize() const {
        if (file) return load_csv(*file);
        auto d = generate_synthetic(family, class_counts, shape, noise, data_seed);
        if (!name.empty()) d.name = name;
        return d;
    }
};

inline DatasetDescriptor dataset_descriptor(const Config& c) {
    DatasetDescriptor d;
    if (c.has("dataset")) {
        for (const char* k : {"family", "class_counts", "shape", "noise", "data_seed"}) {
            if (c.has(k)) throw ConfigError(std::string("config key '") + k + "' conflicts with 'dataset'");
        }
        fs::path p = c.require_string("dataset");
        if (p.is_relative()) p = c.base_dir() / p;
        d.file = fs::weakly_canonical(fs::absolute(p));
        return d;
    }
    d.family = parse_family(c.get_string("family", "blobs"));
    d.class_counts.clear();
    for (auto v : c.get_uint_list("class_counts", {20, 20, 20})) d.class_counts.push_back(v);
    d.shape.clear();
    for (auto v : c.get_uint_list("shape", {16})) d.shape.push_back(v);
    d.noise = c.get_double("noise", 1.0);
    d.data_seed = c.get_uint("data_seed", 0);
    d.name = c.get_string("name", "");
    return d;
}

// ---------------------------------------------------------------- training config

inline TrainConfig train_config(const Config& c) {
    TrainConfig t;
    t.method = parse_method(c.get_string("method", "reinforced"));
    t.supervised_rate = c.get_double("supervised_rate", t.supervised_rate);
    t.policy_rate = c.get_double("policy_rate", t.policy_rate);
    t.tilt_rate = c.get_double("tilt_rate", t.tilt_rate);
    t.value_rate = c.get_double("value_rate", t.value_rate);
    t.supervised_damping = c.get_double("supervised_damping", t.supervised_damping);
    t.gamma = c.get_double("gamma", t.gamma);
    t.epsilon_start = c.get_double("epsilon_start", t.epsilon_start);
    t.epsilon_end = c.get_double("epsilon_end", t.epsilon_end);
    t.minibatch_size = c.get_uint("minibatch_size", t.minibatch_size);
    t.max_epochs = c.get_uint("max_epochs", t.max_epochs);
    t.seed = c.get_uint("seed", t.seed);
    t.l2_lambda = c.get_double("l2_lambda", t.l2_lambda);
    t.keep_prob = c.get_double("keep_prob", t.keep_prob);
    const auto weighting = c.get_string("supervised_term_weighting", "label");
    if (weighting == "label") t.supervised_term_weighting = SupervisedTermWeighting::label;
    else if (weighting == "advantage") t.supervised_term_weighting = SupervisedTermWeighting::advantage;
    else throw ConfigError("supervised_term_weighting must be 'label' or 'advantage', got '" + weighting + "'");
    t.workers = c.get_uint("workers", t.workers);
    const auto arch = c.get_string("architecture", "mlp");
    if (arch == "mlp") t.architecture = Architecture::mlp;
    else if (arch == "conv") t.architecture = Architecture::conv;
    else throw ConfigError("architecture must be 'mlp' or 'conv', got '" + arch + "'");
    auto sizes = [&](const char* key, const std::vector<std::size_t>& fallback) {
        std::vector<std::uint64_t> fb(fallback.begin(), fallback.end());
        std::vector<std::size_t> out;
        for (auto v : c.get_uint_list(key, fb)) out.push_back(v);
        return out;
    };
    t.hidden = sizes("hidden", t.hidden);
    t.conv_channels = sizes("conv_channels", t.conv_channels);
    t.dense_hidden = c.get_uint("dense_hidden", t.dense_hidden);
    t.value_hidden = c.get_uint("value_hidden", t.value_hidden);
    validate(t);
    return t;
}

/// Every training setting, defaults included. `method` and `seed` are
/// left to the caller so compare runs can vary them.
inline Entries training_entries(const TrainConfig& t) {
    auto sizes = [](const std::vector<std::size_t>& v) {
        return join(std::vector<std::uint64_t>(v.begin(), v.end()));
    };
    return {{"supervised_rate", format_number(t.supervised_rate)},
            {"policy_rate", format_number(t.policy_rate)},
            {"tilt_rate", format_number(t.tilt_rate)},
            {"value_rate", format_number(t.value_rate)},
            {"supervised_damping", format_number(t.supervised_damping)},
            {"gamma", format_number(t.gamma)},
            {"epsilon_start", format_number(t.epsilon_start)},
            {"epsilon_end", format_number(t.epsilon_end)},
            {"minibatch_size", std::to_string(t.minibatch_size)},
            {"max_epochs", std::to_string(t.max_epochs)},
            {"l2_lambda", format_number(t.l2_lambda)},
            {"keep_prob", format_number(t.keep_prob)},
            {"supervised_term_weighting",
             t.supervised_term_weighting == SupervisedTermWeighting::label ? "label" : "advantage"},
            {"workers", std::to_string(t.workers)},
            {"architecture", t.architecture == Architecture::mlp ? "mlp" : "conv"},
            {"hidden", sizes(t.hidden)},
            {"conv_channels", sizes(t.conv_channels)},
            {"dense_hidden", std::to_string(t.dense_hidden)},
            {"value_hidden", std::to_string(t.value_hidden)}};
}

inline std::string describe(const NetworkSpec& spec) {
    std::ostringstream os;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (i) os << ' ';
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, layer::Dense>) os << "dense(" << l.in_dim << ',' << l.out_dim << ')';
                else if constexpr (std::is_same_v<T, layer::Conv2d>) os << "conv2d(" << l.in_channels << ',' << l.out_channels << ')';
                else if constexpr (std::is_same_v<T, layer::Relu>) os << "relu";
                else if constexpr (std::is_same_v<T, layer::MaxPool2d>) os << "maxpool2d";
                else if constexpr (std::is_same_v<T, layer::Dropout>) os << "dropout(" << format_number(l.keep_prob) << ')';
                else if constexpr (std::is_same_v<T, layer::Flatten>) os << "flatten";
                else os << "softmax-head(" << l.num_classes << ')';
            },
            spec.layers[i]);
    }
    return os.str();
}

// ---------------------------------------------------------------- checkpoints

/// Text checkpoint: per tensor a "tensor <name> <d0,d1,...>" line followed
/// by one line of values.
inline void save_checkpoint(const ParameterSet& params, const fs::path& path) {
    std::ostringstream os;
    for (const auto& e : params) {
        std::vector<std::uint64_t> dims(e.tensor.shape.begin(), e.tensor.shape.end());
        os << "tensor " << e.name << ' ' << join(dims) << '\n';
        for (std::size_t i = 0; i < e.tensor.size(); ++i) os << (i ? " " : "") << format_number(e.tensor.values[i]);
        os << '\n';
    }
    write_text_file(path, os.str());
}

inline ParameterSet load_checkpoint(const fs::path& path) {
    std::istringstream is(read_text_file(path));
    ParameterSet params;
    std::string header, values;
    std::size_t line = 0;
    while (std::getline(is, header)) {
        ++line;
        if (header.empty()) continue;
        std::istringstream hs(header);
        std::string tag, name, dims;
        if (!(hs >> tag >> name >> dims) || tag != "tensor") throw ParseError("expected 'tensor <name> <shape>'", line);
        Shape shape;
        for (auto part : rcl::detail::split_view(dims, ',')) {
            std::size_t v = 0;
            if (!rcl::detail::parse_size(part, v)) throw ParseError("bad tensor shape", line);
            shape.push_back(v);
        }
        if (!std::getline(is, values)) throw ParseError("missing tensor values", line + 1);
        ++line;
        Tensor t(shape);
        std::size_t i = 0;
        for (auto part : rcl::detail::split_view(values, ' ')) {
            if (i >= t.size() || !rcl::detail::parse_double(part, t.values[i])) throw ParseError("bad tensor values", line);
            ++i;
        }
        if (i != t.size()) throw ParseError("tensor value count does not match its shape", line);
        params.add(name, std::move(t));
    }
    return params;
}

// ---------------------------------------------------------------- training runs

inline std::string curves_csv(const std::vector<EpochMetrics>& history) {
    std::ostringstream os;
    os << "epoch,train_acc,val_acc,test_acc,train_loss,val_loss,test_loss\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& m : history) {
        os << m.epoch << ',' << format_number(m.train_acc) << ',' << format_number(m.val_acc) << ',' << opt(m.test_acc)
           << ',' << format_number(m.train_loss) << ',' << format_number(m.val_loss) << ',' << opt(m.test_loss) << '\n';
    }
    return os.str();
}

struct RunOutcome {
    Method method = Method::reinforced;
    std::size_t optimal_epoch = 0;
    double train_error = 0.0;  // percent
    double val_error = 0.0;
    std::optional<double> test_error;
    std::vector<EpochMetrics> history;
};

/// Trains one (split, config) and writes curves.csv, checkpoint.txt and
/// manifest.txt under `out`. Partial outputs are removed on failure.
inline RunOutcome run_training(const Split& split, const TrainConfig& tc, const Entries& manifest_head,
                               const fs::path& out) {
    fs::create_directories(out);
    const fs::path curves = out / "curves.csv", checkpoint = out / "checkpoint.txt", manifest = out / "manifest.txt";
    try {
        const TrainResult r = train(split, tc);
        const auto& best = r.history[r.optimal_epoch];
        RunOutcome o;
        o.method = tc.method;
        o.optimal_epoch = r.optimal_epoch;
        o.train_error = error_percent(best.train_acc);
        o.val_error = error_percent(best.val_acc);
        if (best.test_acc) o.test_error = error_percent(*best.test_acc);
        o.history = r.history;

        write_text_file(curves, curves_csv(r.history));
        save_checkpoint(r.optimal_params, checkpoint);

        Entries m = manifest_head;
        const auto spec = policy_spec_for(tc, split.train.input_shape, split.train.num_classes);
        m.emplace_back("artifact.network", describe(spec));
        m.emplace_back("artifact.curves", "curves.csv");
        m.emplace_back("artifact.checkpoint", "checkpoint.txt");
        m.emplace_back("artifact.split_sizes", std::to_string(split.train.size()) + "," +
                                                   std::to_string(split.validation.size()) + "," +
                                                   std::to_string(split.test.size()));
        m.emplace_back("result.optimal_epoch", std::to_string(o.optimal_epoch));
        m.emplace_back("result.train_error", format_fixed2(o.train_error));
        m.emplace_back("result.val_error", format_fixed2(o.val_error));
        m.emplace_back("result.test_error", o.test_error ? format_fixed2(*o.test_error) : std::string());
        m.emplace_back("result.table_row", table_row(o.method, o.train_error, o.val_error, o.test_error));
        write_manifest(manifest, m);
        return o;
    } catch (...) {
        std::error_code ec;
        fs::remove(curves, ec);
        fs::remove(checkpoint, ec);
        fs::remove(manifest, ec);
        throw;
    }
}

// ---------------------------------------------------------------- commands

/// Writes dataset.csv and manifest.txt.
inline LabeledDataset cmd_generate(const Config& c, const fs::path& out) {
    c.require_known(keys::dataset);
    if (c.has("dataset")) throw ConfigError("generate builds a synthetic dataset; 'dataset' is not allowed");
    const auto desc = dataset_descriptor(c);
    const auto d = desc.materialize();
    fs::create_directories(out);
    save_csv(d, out / "dataset.csv");
    Entries m = desc.entries();
    m.emplace_back("artifact.command", "generate");
    m.emplace_back("artifact.dataset", "dataset.csv");
    m.emplace_back("result.samples", std::to_string(d.size()));
    write_manifest(out / "manifest.txt", m);
    return d;
}

inline RunOutcome cmd_train(const Config& c, const fs::path& out) {
    c.require_known(keys::merged({&keys::dataset, &keys::split, &keys::training}));
    const auto desc = dataset_descriptor(c);
    const auto tc = train_config(c);
    const std::uint64_t split_seed = c.get_uint("split_seed", 0);
    const bool withhold = c.get_bool("withhold_test", false);

    const auto dataset = desc.materialize();
    Split split = split_311(dataset, split_seed);
    if (withhold) split.test.samples.clear();

    Entries m = desc.entries();
    m.emplace_back("split_seed", std::to_string(split_seed));
    m.emplace_back("withhold_test", withhold ? "true" : "false");
    m.emplace_back("method", to_string(tc.method));
    m.emplace_back("seed", std::to_string(tc.seed));
    for (auto& e : training_entries(tc)) m.push_back(e);
    m.emplace_back("artifact.command", "train");
    return run_training(split, tc, m, out);
}

struct MethodSummary {
    Method method = Method::reinforced;
    std::vector<double> test_errors;  // percent, one per split
    double mean = 0.0;
    double sd = 0.0;
    double median = 0.0;
};

struct PairTest {
    Method a = Method::reinforced;
    Method b = Method::reinforced;
    double p_value = 1.0;
};

struct ComparisonReport {
    std::vector<MethodSummary> methods;
    std::vector<PairTest> pairs;
};

struct SplitError {
    std::size_t split = 0;
    std::uint64_t split_seed = 0;
    Method method = Method::reinforced;
    std::size_t optimal_epoch = 0;
    double train_error = 0.0;
    double val_error = 0.0;
    double test_error = 0.0;
};

inline std::string errors_csv(const std::vector<SplitError>& rows) {
    std::ostringstream os;
    os << "split,split_seed,method,optimal_epoch,train_error,val_error,test_error\n";
    for (const auto& r : rows) {
        os << r.split << ',' << r.split_seed << ',' << to_string(r.method) << ',' << r.optimal_epoch << ','
           << format_number(r.train_error) << ',' << format_number(r.val_error) << ',' << format_number(r.test_error)
           << '\n';
    }
    return os.str();
}

inline std::vector<SplitError> parse_errors_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<SplitError> rows;
    if (!std::getline(is, line) || line != "split,split_seed,method,optimal_epoch,train_error,val_error,test_error") {
        throw ParseError("unexpected errors.csv header", 1);
    }
    ++line_no;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = rcl::detail::split_view(line, ',');
        if (cells.size() != 7) throw ParseError("expected 7 columns", line_no);
        SplitError r;
        std::size_t seed = 0;
        if (!rcl::detail::parse_size(cells[0], r.split) || !rcl::detail::parse_size(cells[1], seed) ||
            !rcl::detail::parse_size(cells[3], r.optimal_epoch) || !rcl::detail::parse_double(cells[4], r.train_error) ||
            !rcl::detail::parse_double(cells[5], r.val_error) || !rcl::detail::parse_double(cells[6], r.test_error)) {
            throw ParseError("bad value", line_no);
        }
        r.split_seed = seed;
        r.method = parse_method(cells[2]);
        rows.push_back(r);
    }
    return rows;
}

/// Statistics straight from recorded per-split test errors.
inline ComparisonReport summarize(const std::vector<SplitError>& rows, const std::vector<Method>& methods,
                                  std::size_t iterations, std::uint64_t permutation_seed) {
    ComparisonReport rep;
    for (auto m : methods) {
        MethodSummary s;
        s.method = m;
        std::vector<const SplitError*> mine;
        for (const auto& r : rows) {
            if (r.method == m) mine.push_back(&r);
        }
        std::sort(mine.begin(), mine.end(), [](auto* x, auto* y) { return x->split < y->split; });
        for (auto* r : mine) s.test_errors.push_back(r->test_error);
        if (s.test_errors.empty()) throw ArgumentError("no recorded runs for method " + to_string(m));
        s.mean = stats::mean(s.test_errors);
        s.sd = stats::sample_sd(s.test_errors);
        s.median = stats::median(s.test_errors);
        rep.methods.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < rep.methods.size(); ++i) {
        for (std::size_t j = i + 1; j < rep.methods.size(); ++j) {
            rep.pairs.push_back({rep.methods[i].method, rep.methods[j].method,
                                 stats::paired_permutation_test(rep.methods[i].test_errors, rep.methods[j].test_errors,
                                                                iterations, permutation_seed)});
        }
    }
    return rep;
}

/// Full-precision statistics, one row per method and per method pair.
inline std::string report_csv(const ComparisonReport& rep) {
    std::ostringstream os;
    os << "kind,method,other,n,mean,sd,median,p_value\n";
    for (const auto& s : rep.methods) {
        os << "summary," << display_name(s.method) << ",," << s.test_errors.size() << ',' << format_number(s.mean) << ','
           << format_number(s.sd) << ',' << format_number(s.median) << ",\n";
    }
    for (const auto& p : rep.pairs) {
        os << "pair," << display_name(p.a) << ',' << display_name(p.b) << ",,,,," << format_number(p.p_value) << '\n';
    }
    return os.str();
}

/// Human-readable table: "Mean ± SD" and median of test error, then p-values.
inline std::string report_text(const ComparisonReport& rep) {
    std::ostringstream os;
    os << "Test error (%) over splits\n";
    for (const auto& s : rep.methods) {
        os << display_name(s.method) << ": " << format_fixed2(s.mean) << " ± " << format_fixed2(s.sd)
           << "  median " << format_fixed2(s.median) << "  (n=" << s.test_errors.size() << ")\n";
    }
    for (const auto& p : rep.pairs) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", p.p_value);
        os << display_name(p.a) << " vs " << display_name(p.b) << ": paired permutation p = " << buf << '\n';
    }
    return os.str();
}

inline std::string run_dir_name(Method m, std::size_t split) {
    std::string name = to_string(m);
    std::replace(name.begin(), name.end(), '+', '-');
    return name + "-split" + std::to_string(split);
}

/// Every method on S splits. Split k uses split seed split_seed + k and
/// training seed seed + k, identical across methods.
inline ComparisonReport cmd_compare(const Config& c, const fs::path& out) {
    c.require_known(keys::merged({&keys::dataset, &keys::split, &keys::training, &keys::compare}));
    if (c.has("method")) throw ConfigError("compare takes 'methods', not 'method'");
    if (c.get_bool("withhold_test", false)) throw ConfigError("compare needs the test set");
    const auto desc = dataset_descriptor(c);
    TrainConfig base = train_config(c);
    std::vector<Method> methods;
    for (const auto& s : c.get_string_list("methods", {"reinforced", "dropout+l2"})) {
        const Method m = parse_method(s);
        if (std::find(methods.begin(), methods.end(), m) != methods.end()) throw ConfigError("method listed twice: " + s);
        methods.push_back(m);
    }
    if (methods.size() < 2) throw ConfigError("compare needs at least two methods");
    const std::size_t splits = c.get_uint("splits", 10);
    if (splits < 2) throw ConfigError("compare needs at least two splits");
    const std::uint64_t split_seed = c.get_uint("split_seed", 0);
    const std::size_t iterations = c.get_uint("permutation_iterations", 10000);
    const std::uint64_t perm_seed = c.get_uint("permutation_seed", 0);
    if (iterations < 1000) throw ConfigError("permutation_iterations must be at least 1000");

    const auto dataset = desc.materialize();
    fs::create_directories(out / "runs");
    std::vector<SplitError> rows;
    for (std::size_t k = 0; k < splits; ++k) {
        const Split split = split_311(dataset, split_seed + k);
        for (auto m : methods) {
            TrainConfig tc = base;
            tc.method = m;
            tc.seed = base.seed + k;
            Entries head = desc.entries();
            head.emplace_back("split_seed", std::to_string(split_seed + k));
            head.emplace_back("withhold_test", "false");
            head.emplace_back("method", to_string(m));
            head.emplace_back("seed", std::to_string(tc.seed));
            for (auto& e : training_entries(tc)) head.push_back(e);
            head.emplace_back("artifact.command", "train");
            const auto o = run_training(split, tc, head, out / "runs" / run_dir_name(m, k));
            rows.push_back({k, split_seed + k, m, o.optimal_epoch, o.train_error, o.val_error, *o.test_error});
        }
    }
    const auto rep = summarize(rows, methods, iterations, perm_seed);
    write_text_file(out / "errors.csv", errors_csv(rows));
    write_text_file(out / "report.csv", report_csv(rep));
    write_text_file(out / "report.txt", report_text(rep));

    Entries m = desc.entries();
    std::vector<std::string> names;
    for (auto mm : methods) names.push_back(to_string(mm));
    m.emplace_back("methods", join(names));
    m.emplace_back("splits", std::to_string(splits));
    m.emplace_back("split_seed", std::to_string(split_seed));
    m.emplace_back("seed", std::to_string(base.seed));
    m.emplace_back("permutation_iterations", std::to_string(iterations));
    m.emplace_back("permutation_seed", std::to_string(perm_seed));
    for (auto& e : training_entries(base)) m.push_back(e);
    m.emplace_back("artifact.command", "compare");
    m.emplace_back("artifact.errors", "errors.csv");
    m.emplace_back("artifact.report", "report.csv");
    m.emplace_back("artifact.runs", std::to_string(rows.size()));
    write_manifest(out / "manifest.txt", m);
    return rep;
}

/// Re-derives report.csv and report.txt of a compare directory from its
/// recorded errors.csv and manifest.
inline ComparisonReport cmd_report(const fs::path& dir) {
    const Config m = Config::load(dir / "manifest.txt");
    std::vector<Method> methods;
    for (const auto& s : m.get_string_list("methods", {})) methods.push_back(parse_method(s));
    if (methods.empty()) throw ConfigError("'" + (dir / "manifest.txt").string() + "' is not a compare manifest");
    const auto rows = parse_errors_csv(read_text_file(dir / "errors.csv"));
    const auto rep = summarize(rows, methods, m.get_uint("permutation_iterations", 10000), m.get_uint("permutation_seed", 0));
    write_text_file(dir / "report.csv", report_csv(rep));
    write_text_file(dir / "report.txt", report_text(rep));
    return rep;
}

}  // namespace rcl::harness
