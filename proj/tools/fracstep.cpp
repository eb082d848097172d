#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fracstep/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Variable-step L2-1sigma experiments for the time-fractional Allen-Cahn equation"};
    app.require_subcommand(1);

    fracstep::ExperimentSpec spec;
    std::uint64_t seed = 0;
    for (const char* name : {"accuracy", "coarsen", "kernels", "rstar"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", spec.config, "JSON config")->required();
        sub->add_option("--out", spec.out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "overrides the seed in the config");
        sub->add_flag("--quick", spec.quick, "short coarsening profile (T = 5, 64^2)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fracstep::kExitConfig;
    }

    spec.command = app.get_subcommands().front()->get_name();
    if (app.get_subcommands().front()->count("--seed") > 0) spec.seed = seed;
    try {
        return fracstep::run_command(spec);
    } catch (const std::exception& e) {
        std::cerr << "fracstep: " << e.what() << '\n';
        return 1;
    }
}
