// SPDX-License-Identifier: MIT
// Command-line front end: simulate | fit | forecast | select, each driven by
// a JSON config. Exit codes: 0 ok, 1 config, 2 data, 3 numerical/other.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tlvar/errors.hpp"
#include "tlvar/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"low-rank transfer learning for vector autoregressions"};
    app.set_version_flag("--version", std::string(tlvar::kVersion));
    app.require_subcommand(1);

    tlvar::CliOptions opt;
    std::uint64_t seed = 0;
    int replications = 0;

    auto add_common = [&](CLI::App* sub, bool with_reps) {
        sub->add_option("--config", opt.config_path, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out_dir, "output directory (default: .)");
        auto* s = sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--threads", opt.threads, "worker threads, 0 = all cores")
            ->check(CLI::NonNegativeNumber);
        CLI::Option* r = nullptr;
        if (with_reps)
            r = sub->add_option("--replications", replications,
                                "Monte Carlo replications (overrides the config)")
                    ->check(CLI::PositiveNumber);
        sub->callback([&, s, r, sub]() {
            opt.verb = sub->get_name();
            if (s->count() > 0) opt.seed = seed;
            if (r != nullptr && r->count() > 0) opt.replications = replications;
        });
    };

    add_common(app.add_subcommand("simulate", "run a Monte Carlo study"), true);
    add_common(app.add_subcommand("fit", "fit the transfer estimator to panels"), false);
    add_common(app.add_subcommand("forecast", "rolling forecast comparison"), false);
    add_common(app.add_subcommand("select", "pick penalty constants by validation"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        tlvar::run_cli_config(opt);
        return 0;
    } catch (const tlvar::config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const tlvar::data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const tlvar::numerical_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
