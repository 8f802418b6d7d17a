#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bsdei/experiment.hpp"
#include "bsdei/parallel.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

void attach_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", args.seed, "Seed override");
    sub->add_option("--threads", args.threads,
                    "Worker thread cap; an execution hint that never changes results");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solver and verification laboratory for backward systems with interaction"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* solve = app.add_subcommand("solve", "Run the heavy-particle solve and write artifacts");
    CLI::App* verify =
        app.add_subcommand("verify", "Run the driver, uniqueness and stability checks");
    CLI::App* study = app.add_subcommand("study", "Run the measure-refinement convergence study");
    attach_common(solve, args);
    attach_common(verify, args);
    attach_common(study, args);

    CLI11_PARSE(app, argc, argv);

    try {
        bsdei::RunConfig config = bsdei::RunConfig::parse_file(args.config_path);
        CLI::App* active = app.get_subcommands().front();
        if (active->count("--seed") > 0) config.seed = args.seed;
        if (args.threads > 0) bsdei::set_max_threads(args.threads);
        const std::filesystem::path out =
            active->count("--out") > 0 ? args.out_dir : config.output_dir;

        if (active == solve) return bsdei::run_solve(config, out);
        if (active == verify) return bsdei::run_verify(config, out);
        return bsdei::run_study(config, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
