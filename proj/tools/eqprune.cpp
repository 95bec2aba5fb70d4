#include "commands.hpp"

#include "eqprune/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>

namespace {

using namespace eqprune::cli;

void add_data_flags(CLI::App& cmd, DataFlags& flags) {
    cmd.add_option("--train-images", flags.train_images, "IDX image file (training)");
    cmd.add_option("--train-labels", flags.train_labels, "IDX label file (training)");
    cmd.add_option("--test-images", flags.test_images, "IDX image file (test)");
    cmd.add_option("--test-labels", flags.test_labels, "IDX label file (test)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equilibrium-driven neuron pruning for a gated MNIST MLP"};
    app.require_subcommand(1);

    TrainArgs train;
    std::map<std::string, std::string> raw;
    std::vector<std::pair<std::string, CLI::Option*>> override_opts;
    auto* train_cmd = app.add_subcommand("train", "Train one configuration and write its run directory");
    train_cmd->add_option("--config", train.config, "key = value config file (or a previous summary.json)");
    train_cmd->add_flag("--quiet", train.quiet, "Suppress per-epoch lines");
    for (const auto key : eqprune::config_keys()) {
        std::string flag = "--" + std::string(key);
        std::replace(flag.begin(), flag.end(), '_', '-');
        auto* opt = train_cmd->add_option(flag, raw[std::string(key)], "Override config key '" + std::string(key) + "'");
        if (key == "epochs" || key == "batch_size" || key == "s_update_every") opt->check(CLI::PositiveNumber);
        override_opts.emplace_back(std::string(key), opt);
    }

    ReproduceArgs reproduce;
    auto* table_cmd = app.add_subcommand("reproduce-table", "Run the four reference configurations and tabulate them");
    add_data_flags(*table_cmd, reproduce.data);
    table_cmd->add_option("--out", reproduce.out, "Output root")->capture_default_str();
    table_cmd->add_option("--epochs", reproduce.epochs, "Override epochs for every row")->check(CLI::PositiveNumber);
    table_cmd->add_option("--seed", reproduce.seed, "Override the seed for every row");
    table_cmd->add_option("--only", reproduce.only, "Comma-separated subset of row names");

    std::string scope = "all";
    auto* verify_cmd = app.add_subcommand("verify", "Run the oracle suites");
    verify_cmd->add_option("scope", scope, "grad|game|data|all")
        ->check(CLI::IsMember({"grad", "game", "data", "all"}))
        ->capture_default_str();

    InspectArgs inspect;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarize the participation gates stored in a checkpoint");
    inspect_cmd->add_option("checkpoint", inspect.checkpoint, "checkpoint.bin")->required();
    inspect_cmd->add_option("--csv", inspect.csv, "Where to write participation.csv")->capture_default_str();
    inspect_cmd->add_option("--epsilon", inspect.epsilon, "Prune threshold (default: from checkpoint config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigOrIo;
    }

    if (*train_cmd) {
        for (const auto& [key, opt] : override_opts)
            if (opt->count() > 0) train.overrides[key] = raw[key];
        return cmd_train(train);
    }
    if (*table_cmd) return cmd_reproduce_table(reproduce);
    if (*verify_cmd) return cmd_verify(scope);
    return cmd_inspect(inspect);
}
