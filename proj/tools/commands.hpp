#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace eqprune::cli {

enum ExitCode : int { kOk = 0, kConfigOrIo = 1, kDiverged = 2, kVerifyFailed = 3 };

struct DataFlags {
    std::string train_images, train_labels, test_images, test_labels;
};

struct TrainArgs {
    std::string config;
    // config key -> raw flag value, only for flags given on the command line
    std::map<std::string, std::string> overrides;
    bool quiet = false;
};

struct ReproduceArgs {
    DataFlags data;
    std::string out = "runs";
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
    std::string only;  // comma-separated row names
};

struct InspectArgs {
    std::string checkpoint;
    std::string csv = "participation.csv";
    std::optional<double> epsilon;
};

int cmd_train(const TrainArgs& args);
int cmd_reproduce_table(const ReproduceArgs& args);
int cmd_verify(const std::string& scope);
int cmd_inspect(const InspectArgs& args);

} // namespace eqprune::cli
