#include "schedrule/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace schedrule;

int main(int argc, char** argv)
{
    CLI::App app{"Explore schedules of a GPU program DAG and derive performance design rules"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> radius;
    std::optional<double> percentile;
    std::string out_dir;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "search seed");
        cmd->add_option("--iterations", iterations, "search iterations");
        cmd->add_option("--radius", radius, "step kernel radius");
        cmd->add_option("--percentile", percentile, "prominence percentile for class boundaries");
        cmd->add_option("--out-dir", out_dir, "directory for output files");
    };

    auto* enumerate = app.add_subcommand("enumerate", "measure every schedule of the design space");
    common(enumerate);

    auto* search = app.add_subcommand("search", "explore the design space with tree search");
    common(search);

    std::string dataset_path;
    auto* analyze = app.add_subcommand("analyze", "label a dataset, train a tree and print design rules");
    common(analyze);
    analyze->add_option("--dataset", dataset_path, "dataset file")->required()->check(CLI::ExistingFile);

    std::string subset_path;
    std::string full_path;
    auto* evaluate = app.add_subcommand("evaluate", "score rules learned on a subset against the full space");
    common(evaluate);
    evaluate->add_option("--subset", subset_path, "training dataset")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--full", full_path, "exhaustive dataset")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = load_config(config_path);
        if (seed) {
            config.seed = *seed;
        }
        if (iterations) {
            if (*iterations < 1) {
                std::cerr << "error: --iterations must be at least 1\n";
                return 2;
            }
            config.iterations = *iterations;
        }
        if (radius) {
            config.radius = *radius;
        }
        if (percentile) {
            config.percentile = *percentile;
        }
        if (!out_dir.empty()) {
            config.out_dir = out_dir;
        }
        config.validate();

        if (enumerate->parsed()) {
            cmd_enumerate(config, std::cout);
        } else if (search->parsed()) {
            cmd_search(config, std::cout);
        } else if (analyze->parsed()) {
            cmd_analyze(dataset_path, config, std::cout);
        } else if (evaluate->parsed()) {
            cmd_evaluate(subset_path, full_path, config, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
