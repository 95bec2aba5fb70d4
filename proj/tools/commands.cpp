#include "commands.hpp"

#include "eqprune/checkpoint.hpp"
#include "eqprune/experiment.hpp"
#include "eqprune/verify.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

namespace eqprune::cli {
namespace {

ExperimentConfig base_config() {
    ExperimentConfig cfg;
    if (const char* dir = std::getenv("EQPRUNE_DATA_DIR"); dir && *dir) cfg.data = data_paths_in(dir);
    return cfg;
}

void apply_data_flags(ExperimentConfig& cfg, const DataFlags& flags) {
    if (!flags.train_images.empty()) cfg.data.train_images = flags.train_images;
    if (!flags.train_labels.empty()) cfg.data.train_labels = flags.train_labels;
    if (!flags.test_images.empty()) cfg.data.test_images = flags.test_images;
    if (!flags.test_labels.empty()) cfg.data.test_labels = flags.test_labels;
}

void require_data_paths(const DataPaths& d) {
    if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() || d.test_labels.empty())
        throw ConfigError("MNIST paths missing: pass --train-images/--train-labels/--test-images/--test-labels "
                          "or set EQPRUNE_DATA_DIR");
}

struct Datasets {
    mnist::Dataset train;
    mnist::Dataset test;
};

Datasets load_data(const DataPaths& d) {
    require_data_paths(d);
    return {mnist::load_dataset(d.train_images, d.train_labels), mnist::load_dataset(d.test_images, d.test_labels)};
}

void print_epoch(const EpochMetrics& m, std::size_t epochs) {
    std::printf("epoch %2zu/%zu  loss %.4f  acc %.4f  sparsity %.4f  mean_s %.4f  active %3zu  residual %.3g\n",
                m.epoch, epochs, m.train_loss, m.test_accuracy, m.sparsity, m.mean_participation, m.active_neurons,
                m.equilibrium_residual);
    std::fflush(stdout);
}

} // namespace

int cmd_train(const TrainArgs& args) {
    ExperimentConfig cfg;
    Datasets data;
    try {
        cfg = base_config();
        if (!args.config.empty()) cfg = load_config_file(args.config, cfg);
        for (const auto& [key, value] : args.overrides) apply_config_value(cfg, key, value);
        cfg.train.validate();
        data = load_data(cfg.data);
    } catch (const std::exception& e) {
        std::cerr << "eqprune train: " << e.what() << "\n";
        return kConfigOrIo;
    }

    TrainHooks hooks;
    if (!args.quiet) hooks.on_epoch = [&](const EpochMetrics& m) { print_epoch(m, cfg.train.epochs); };
    std::optional<TrainResult> result;
    try {
        result = run_experiment(cfg, data.train, data.test, hooks);
    } catch (const std::exception& e) {
        std::cerr << "eqprune train: " << e.what() << "\n";
        return kConfigOrIo;
    }
    const auto& s = result->summary;
    if (s.divergence) {
        std::cerr << "eqprune train: diverged at epoch " << s.divergence->epoch << " batch " << s.divergence->batch
                  << ": " << s.divergence->message << "\n";
        return kDiverged;
    }
    std::printf("final: accuracy %.4f  sparsity %.4f  active %zu/768  mid-mass %.4f  (%.1f s)\n",
                s.final_metrics.test_accuracy, s.final_metrics.sparsity, s.final_metrics.active_neurons, s.bimodality,
                s.wall_seconds);
    std::printf("outputs: %s\n", cfg.run_dir().string().c_str());
    return kOk;
}

int cmd_reproduce_table(const ReproduceArgs& args) {
    auto configs = reference_configs();
    const auto bands = reference_bands();
    Datasets data;
    try {
        auto base = base_config();
        apply_data_flags(base, args.data);
        for (auto& cfg : configs) {
            cfg.data = base.data;
            cfg.out = args.out;
            if (args.epochs) cfg.train.epochs = *args.epochs;
            if (args.seed) cfg.train.seed = *args.seed;
            cfg.train.validate();
        }
        data = load_data(base.data);
    } catch (const std::exception& e) {
        std::cerr << "eqprune reproduce-table: " << e.what() << "\n";
        return kConfigOrIo;
    }

    std::vector<std::string> wanted;
    std::stringstream only(args.only);
    for (std::string item; std::getline(only, item, ',');)
        if (!item.empty()) wanted.push_back(item);

    std::vector<TableRow> rows;
    int status = kOk;
    for (std::size_t k = 0; k < configs.size(); ++k) {
        const auto& cfg = configs[k];
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), cfg.name) == wanted.end()) continue;
        std::printf("== %s (beta=%g gamma=%g)\n", cfg.name.c_str(), cfg.train.game.beta, cfg.train.game.gamma);
        std::fflush(stdout);
        TrainHooks hooks;
        hooks.on_epoch = [&](const EpochMetrics& m) { print_epoch(m, cfg.train.epochs); };
        try {
            rows.push_back(run_reference_row(cfg, bands[k], data.train, data.test, hooks));
            if (rows.back().failed) status = kDiverged;
        } catch (const std::exception& e) {
            TableRow failed;
            failed.name = cfg.name;
            failed.failed = true;
            failed.error = e.what();
            rows.push_back(failed);
            std::cerr << "eqprune reproduce-table: " << cfg.name << ": " << e.what() << "\n";
            status = kConfigOrIo;
        }
    }

    try {
        std::filesystem::create_directories(args.out);
        write_file_atomic(std::filesystem::path(args.out) / "table.csv", table_csv(rows));
        write_file_atomic(std::filesystem::path(args.out) / "table.txt", table_text(rows));
    } catch (const std::exception& e) {
        std::cerr << "eqprune reproduce-table: " << e.what() << "\n";
        return kConfigOrIo;
    }
    std::cout << "\n" << table_text(rows);
    return status;
}

int cmd_verify(const std::string& scope) {
    std::vector<verify::CheckResult> results;
    const bool all = scope == "all";
    if (all || scope == "grad") {
        auto r = verify::gradient_suite();
        results.insert(results.end(), r.begin(), r.end());
    }
    if (all || scope == "game") {
        auto r = verify::game_suite();
        results.insert(results.end(), r.begin(), r.end());
    }
    if (all || scope == "data") {
        auto r = verify::data_suite();
        results.insert(results.end(), r.begin(), r.end());
    }
    if (results.empty()) {
        std::cerr << "eqprune verify: unknown scope '" << scope << "' (grad|game|data|all)\n";
        return kConfigOrIo;
    }
    std::size_t failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        failures += r.passed ? 0 : 1;
    }
    std::printf("%zu/%zu checks passed\n", results.size() - failures, results.size());
    return failures == 0 ? kOk : kVerifyFailed;
}

int cmd_inspect(const InspectArgs& args) {
    std::optional<Checkpoint> loaded;
    try {
        loaded = load_checkpoint(args.checkpoint);
    } catch (const std::exception& e) {
        std::cerr << "eqprune inspect: " << e.what() << "\n";
        return kConfigOrIo;
    }

    const auto& ckpt = *loaded;
    double epsilon = 0.01;
    if (args.epsilon) {
        epsilon = *args.epsilon;
    } else if (!ckpt.config_json.empty()) {
        try {
            const auto doc = nlohmann::json::parse(ckpt.config_json);
            if (doc.contains("epsilon")) epsilon = doc.at("epsilon").get<double>();
        } catch (const nlohmann::json::exception&) {
            std::cerr << "eqprune inspect: embedded config unreadable, using epsilon " << epsilon << "\n";
        }
    }

    const auto s = ckpt.net.participation();
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    double sum = 0.0;
    for (double v : s) sum += v;
    const auto sparsity = compute_sparsity(s, epsilon);
    const auto hist = participation_histogram(s, 32);

    std::printf("players      %zu\n", s.size());
    std::printf("s min/mean/max  %.6g / %.6g / %.6g\n", *lo, sum / static_cast<double>(s.size()), *hi);
    std::printf("sparsity     %.4f at epsilon %g (%zu active)\n", sparsity.sparsity, epsilon, sparsity.active);
    std::printf("mid-mass     %.4f in (0.05, 0.95)\n", middle_mass(s));
    const std::size_t peak = *std::max_element(hist.counts.begin(), hist.counts.end());
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        const std::size_t bar = peak == 0 ? 0 : (hist.counts[b] * 50 + peak - 1) / peak;
        std::printf("[%.4f, %.4f%c %4zu %s\n", hist.edges[b], hist.edges[b + 1],
                    b + 1 == hist.counts.size() ? ']' : ')', hist.counts[b], std::string(bar, '#').c_str());
    }
    try {
        write_file_atomic(args.csv, participation_csv(ckpt.net));
    } catch (const std::exception& e) {
        std::cerr << "eqprune inspect: " << e.what() << "\n";
        return kConfigOrIo;
    }
    std::printf("wrote %s\n", args.csv.c_str());
    return kOk;
}

} // namespace eqprune::cli
