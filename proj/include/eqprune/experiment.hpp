#pragma once

// Experiment configuration files and run output layout.
//
// Config files are flat UTF-8 "key = value" lines; '#' starts a comment.
// A summary.json written by a previous run is also accepted: its "config"
// object holds the same keys. Unknown keys are rejected.
//
// Output layout: <out>/<name>/{metrics.csv, summary.json,
//                              participation.csv, checkpoint.bin}

#include "eqprune/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqprune {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataPaths {
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::filesystem::path test_images;
    std::filesystem::path test_labels;
};

struct ExperimentConfig {
    std::string name = "run";
    TrainConfig train;
    DataPaths data;
    std::filesystem::path out = "runs";

    std::filesystem::path run_dir() const { return out / name; }
};

/// Every key accepted in a config file, in echo order.
std::span<const std::string_view> config_keys();

/// Sets one field from its textual value. Throws ConfigError for unknown
/// keys or malformed values.
void apply_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" text (or a JSON object) on top of `base`.
ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base = {},
                                   const std::string& origin = "<config>");
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

/// Fully resolved configuration, one entry per config key.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
std::string config_to_text(const ExperimentConfig& cfg);

/// Conventional MNIST file names under `dir`; a ".gz" sibling is used
/// when the plain file is absent.
DataPaths data_paths_in(const std::filesystem::path& dir);

/// The four configurations of the reference table, by name:
/// very_high_beta, extreme_beta, l1_sparsity_strong, l1_l2_combined.
std::vector<ExperimentConfig> reference_configs();

// --- run outputs -----------------------------------------------------------

/// Header plus one row per epoch, six significant digits.
std::string metrics_csv(std::span<const EpochMetrics> metrics);
/// player_id,layer,neuron,s with s printed losslessly.
std::string participation_csv(const ParticipatingNet& net);
nlohmann::ordered_json summary_json(const ExperimentConfig& cfg, const TrainResult& result);

/// Writes all four run files into cfg.run_dir(), each atomically.
void write_run_outputs(const ExperimentConfig& cfg, const TrainResult& result);

// --- running experiments ---------------------------------------------------

/// Seeds the weights from cfg.train.seed, trains, and writes the run files.
TrainResult run_experiment(const ExperimentConfig& cfg, const mnist::Dataset& train_data,
                           const mnist::Dataset& test_data, const TrainHooks& hooks = {});

/// Accuracy and sparsity band a reference row is expected to land in.
struct TableBand {
    std::string name;
    double min_accuracy;
    double min_sparsity;  // inclusive
    double max_sparsity;  // exclusive
};

/// Bands for the four reference configurations, same order as reference_configs().
std::vector<TableBand> reference_bands();

bool within_band(const TableBand& band, const RunSummary& summary);

struct TableRow {
    std::string name;
    std::string mode;  // benefit mode of the reported run
    bool band_passed = false;
    bool failed = false;
    std::string error;
    ExperimentConfig cfg;
    RunSummary summary;
    std::vector<EpochMetrics> metrics;
};

/// Runs one reference row in the signed benefit mode and, if that misses
/// the band, again in abs mode under "<name>_abs". The mode that passed
/// (or null) is added to both summary.json files.
TableRow run_reference_row(const ExperimentConfig& cfg, const TableBand& band, const mnist::Dataset& train_data,
                           const mnist::Dataset& test_data, const TrainHooks& hooks = {});

/// name,accuracy,sparsity,neurons_kept with percentages to two decimals.
std::string table_csv(std::span<const TableRow> rows);
std::string table_text(std::span<const TableRow> rows);

/// Formats with printf-style "%.*g".
std::string format_g(double v, int digits);

} // namespace eqprune
