#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsdyn/app.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Thompson sampling dynamics toolkit"};
    cli.require_subcommand(1);
    cli.set_version_flag("--version", std::string(tsdyn::kToolkitVersion));

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    bool naive = false;

    for (const auto name : tsdyn::app::command_names()) {
        auto* sub = cli.add_subcommand(std::string(name));
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "master seed (overrides config and environment)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--naive", naive, "normal critical values only");
    }

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const auto* sub = cli.get_subcommands().front();
    try {
        tsdyn::app::Overrides overrides;
        if (sub->count("--seed") > 0) overrides.seed = seed;
        if (sub->count("--out") > 0) overrides.out = out_dir;
        overrides.naive = naive;
        const auto config = tsdyn::app::load_experiment_config(config_path, overrides);
        return tsdyn::app::run_command(sub->get_name(), config, threads, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return tsdyn::app::exit_code_for(e);
    }
}
