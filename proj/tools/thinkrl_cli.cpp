// Command-line front end: run the whole pipeline or any single stage
// against a hash-named run directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thinkrl/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"desk-scale adaptive think/no-think training lab"};
    app.require_subcommand(1);

    std::string config_file;
    std::string out_root = "runs";
    std::uint64_t seed = 0;
    app.add_option("--config", config_file, "key = value config file")
        ->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_root, "root directory for run outputs");

    const std::vector<std::pair<std::string, std::string>> stages = {
        {"gen-tasks", "generate the synthetic task set"},
        {"calibrate", "label tasks with difficulty levels via the tier responders"},
        {"sft", "build corpora and run the two-phase supervised pass"},
        {"filter", "keep tasks the supervised policy solves sometimes but not always"},
        {"train-agrpo", "adaptive group RL from the supervised checkpoint"},
        {"train-grpo", "plain group RL baseline from the supervised checkpoint"},
        {"eval", "per-level evaluation of the latest checkpoint"},
        {"compare-modes", "forced-think / forced-no-think / free evaluation tables"},
        {"report", "aggregate run artifacts into report.json"},
    };
    // Options may come before or after the stage name.
    for (const auto& [name, desc] : stages)
        app.add_subcommand(name, desc)->fallthrough();
    app.add_subcommand("pipeline", "run all configured stages in order")
        ->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        thinkrl::RunConfig cfg;
        if (!config_file.empty()) cfg = thinkrl::parse_config_file(config_file);
        if (seed_opt->count() > 0) {
            cfg.seed = seed;
            cfg.world.seed = seed;
            cfg.train.seed = seed;
        }
        cfg.validate();

        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "pipeline") {
            const int rc = thinkrl::run_pipeline(cfg, out_root);
            const auto paths = thinkrl::run_paths_for(cfg, out_root);
            std::cout << (rc == 0 ? "ok: " : "failed: ") << paths.dir.string()
                      << '\n';
            return rc;
        }

        const auto paths = thinkrl::run_paths_for(cfg, out_root);
        std::filesystem::create_directories(paths.dir);
        {
            std::ofstream out(paths.resolved_config());
            out << thinkrl::canonical_config(cfg);
        }
        thinkrl::run_stage(sub, cfg, paths);
        std::cout << "ok: " << sub << " -> " << paths.dir.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
