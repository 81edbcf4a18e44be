// Command-line front end for the experiment pipeline. Subcommands mirror the
// pipeline stages and share one config file; --seed and --threads override
// the config without editing it. Exits 0 on success, 1 with a single-line
// error on stderr otherwise.

#include <covfilt/experiment.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (json)")->required();
    cmd->add_option("--out", args.out_dir, "artifact directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--threads", args.threads, "override the config thread count");
}

covfilt::ExperimentConfig load(const CommonArgs& args) {
    return covfilt::load_experiment_config(args.config_path, args.seed, args.threads);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covariance-aware tracking experiments"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, demo_args;
    CLI::App* gen = app.add_subcommand("generate", "simulate train/test/ood tracks");
    add_common(gen, gen_args);
    CLI::App* train = app.add_subcommand("train", "fit the baseline and learned covariance models");
    add_common(train, train_args);
    CLI::App* eval = app.add_subcommand("evaluate", "filter the test tracks and write metrics");
    add_common(eval, eval_args);
    CLI::App* demo = app.add_subcommand("demo-rainbow", "two-dimensional covariance regression demo");
    add_common(demo, demo_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) covfilt::cmd_generate(load(gen_args), gen_args.out_dir);
        if (train->parsed()) covfilt::cmd_train(load(train_args), train_args.out_dir);
        if (eval->parsed()) covfilt::cmd_evaluate(load(eval_args), eval_args.out_dir);
        if (demo->parsed()) covfilt::cmd_demo_rainbow(load(demo_args), demo_args.out_dir);
    } catch (const std::exception& e) {
        std::cerr << "covfilt: error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
