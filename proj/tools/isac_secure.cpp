// SPDX-License-Identifier: Apache-2.0
//
// isac_secure: runs one experiment and writes results.csv, summary.json and
// a gnuplot data file to the output directory.
//
//   isac_secure converge   [--config f] [--seed n] [--out dir] [--jobs n]
//   isac_secure sweep      ...
//   isac_secure an-compare ...
//   isac_secure validate   ...
//
// Exit status: 0 when every check passed, 1 when a check failed, 2 on
// configuration or I/O errors.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "isac/errors.hpp"
#include "isac/harness.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int jobs = 1;
};

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "base seed (u64); seeds run from here upward");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

std::string key_help()
{
    std::string s = "Config keys:\n";
    for (const auto& [k, d] : isac::scenario_key_docs())
        s += "  " + k + ": " + d + "\n";
    for (const auto& [k, d] : isac::experiment_key_docs())
        s += "  " + k + ": " + d + "\n";
    return s;
}

int run(isac::ExperimentKind kind, const Options& o)
{
    std::optional<isac::KeyValueFile> kv;
    if (!o.config.empty())
        kv = isac::KeyValueFile::load(o.config);
    isac::ExperimentSpec spec = isac::make_experiment_spec(kind, kv ? &*kv : nullptr, o.seed);
    spec.out_dir = o.out;
    spec.jobs = o.jobs;
    const isac::ExperimentReport rep = isac::run_experiment(spec);
    isac::emit_report({rep}, o.out);
    for (const auto& c : rep.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << rep.experiment << ' ' << c.name << ": " << c.detail
                  << '\n';
    std::cout << "wrote " << o.out << "/results.csv\n";
    return rep.all_passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Secure ISAC beamforming experiments"};
    app.footer(key_help());
    app.require_subcommand(1);
    Options opts;
    const std::pair<const char*, isac::ExperimentKind> verbs[] = {
        {"converge", isac::ExperimentKind::convergence},
        {"sweep", isac::ExperimentKind::power_sweep},
        {"an-compare", isac::ExperimentKind::an_compare},
        {"validate", isac::ExperimentKind::mc_validate},
    };
    const char* help[] = {
        "radar MI versus SCA iteration for several (P0, K) cases",
        "MI versus power budget: proposed, AN and baseline designs",
        "artificial noise versus no AN at matched seeds",
        "Monte-Carlo check of the closed-form sensing MI",
    };
    std::optional<isac::ExperimentKind> chosen;
    for (std::size_t i = 0; i < 4; ++i) {
        CLI::App* sub = app.add_subcommand(verbs[i].first, help[i]);
        add_common(sub, opts);
        const auto kind = verbs[i].second;
        sub->callback([&chosen, kind] { chosen = kind; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        return run(*chosen, opts);
    } catch (const isac::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
