// Command-line front end: rcl {generate|train|compare|report} --config <file> --out <dir> [--seed N]

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rcl/harness.hpp"

namespace {

rcl::Config load_config(const std::string& path, std::optional<std::uint64_t> seed, const char* seed_key) {
    if (path.empty()) throw rcl::ConfigError("--config is required");
    rcl::Config c = rcl::Config::load(path);
    if (seed) c.set(seed_key, std::to_string(*seed));
    return c;
}

void print_outcome(const rcl::harness::RunOutcome& o) {
    std::printf("optimal epoch %zu\n%s\n", o.optimal_epoch,
                rcl::harness::table_row(o.method, o.train_error, o.val_error, o.test_error).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reinforced classifier experiments"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--out", out_dir, "output directory");

    auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
    auto* train = app.add_subcommand("train", "train one method on one split");
    auto* compare = app.add_subcommand("compare", "compare methods over several splits");
    auto* report = app.add_subcommand("report", "rebuild report.csv from errors.csv in --out");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const std::filesystem::path out(out_dir);
        if (generate->parsed()) {
            const auto d = rcl::harness::cmd_generate(load_config(config_path, seed, "data_seed"), out);
            std::printf("%zu samples written to %s\n", d.size(), (out / "dataset.csv").c_str());
        } else if (train->parsed()) {
            print_outcome(rcl::harness::cmd_train(load_config(config_path, seed, "seed"), out));
        } else if (compare->parsed()) {
            const auto rep = rcl::harness::cmd_compare(load_config(config_path, seed, "seed"), out);
            std::fputs(rcl::harness::report_text(rep).c_str(), stdout);
        } else if (report->parsed()) {
            const auto rep = rcl::harness::cmd_report(out);
            std::fputs(rcl::harness::report_text(rep).c_str(), stdout);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
