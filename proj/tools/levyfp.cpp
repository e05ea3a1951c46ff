#include "levyfp/config.hpp"
#include "levyfp/experiment.hpp"
#include "levyfp/parallel.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv)
{
    CLI::App app{"Fokker-Planck operators of Levy-driven SDEs: assembly, certification, evolution"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> stage_names;
    auto* run = app.add_subcommand("run", "Run the stages of an experiment config");
    run->add_option("config", config_path, "Experiment config (TOML)")->required();
    run->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    run->add_option("--stage", stage_names,
                    "Stage to run instead of the config's run list; repeatable "
                    "(validate, lemmas, assemble, certify, evolve, mc_compare)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (const char* env = std::getenv("LEVYFP_THREADS")) {
        try {
            levyfp::set_thread_count(std::stoi(env));
        } catch (const std::exception&) {
            std::cerr << "LEVYFP_THREADS must be an integer\n";
            return 2;
        }
    }

    levyfp::RunOptions options;
    if (!out_dir.empty()) options.output_dir = out_dir;
    for (const auto& name : stage_names) {
        const auto stage = levyfp::parse_stage(name);
        if (!stage) {
            std::cerr << "unknown stage '" << name << "'\n";
            return 2;
        }
        options.stages.push_back(*stage);
    }
    return levyfp::run_command(config_path, options);
}
