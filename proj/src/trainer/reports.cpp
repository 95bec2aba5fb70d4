#include "eqprune/checkpoint.hpp"
#include "eqprune/experiment.hpp"
#include "eqprune/kernels.hpp"

#include <cstdio>

namespace eqprune {

std::string format_g(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string metrics_csv(std::span<const EpochMetrics> metrics) {
    std::string out = "epoch,train_loss,test_accuracy,sparsity,mean_participation,active_neurons,equilibrium_residual\n";
    for (const auto& m : metrics) {
        out += std::to_string(m.epoch) + ',' + format_g(m.train_loss, 6) + ',' + format_g(m.test_accuracy, 6) + ',' +
               format_g(m.sparsity, 6) + ',' + format_g(m.mean_participation, 6) + ',' +
               std::to_string(m.active_neurons) + ',' + format_g(m.equilibrium_residual, 6) + '\n';
    }
    return out;
}

std::string participation_csv(const ParticipatingNet& net) {
    std::string out = "player_id,layer,neuron,s\n";
    for (std::size_t id = 0; id < net.num_players(); ++id) {
        const auto ref = net.players()[id];
        out += std::to_string(id) + ',' + std::to_string(ref.layer) + ',' + std::to_string(ref.neuron) + ',' +
               format_g(net.gate(id), 17) + '\n';
    }
    return out;
}

namespace {

nlohmann::ordered_json metrics_json(const EpochMetrics& m) {
    nlohmann::ordered_json j;
    j["epoch"] = m.epoch;
    j["train_loss"] = m.train_loss;
    j["test_accuracy"] = m.test_accuracy;
    j["sparsity"] = m.sparsity;
    j["mean_participation"] = m.mean_participation;
    j["active_neurons"] = m.active_neurons;
    j["equilibrium_residual"] = m.equilibrium_residual;
    return j;
}

} // namespace

nlohmann::ordered_json summary_json(const ExperimentConfig& cfg, const TrainResult& result) {
    const auto& s = result.summary;
    nlohmann::ordered_json j;
    j["config"] = config_to_json(cfg);
    j["run_info"] = {
        {"activation", "relu"},
        {"gate_placement", "h = relu(s * (W x + b))"},
        {"input_normalization", "pixel / 255"},
        {"weight_init", "he_normal weights, zero biases"},
        {"weight_optimizer", "sgd"},
        {"rng", "xoshiro256** seeded by splitmix64"},
        {"kernel_isa", kernels::isa_name(kernels::active_isa())},
    };
    j["status"] = s.divergence ? "diverged" : "ok";
    if (s.divergence)
        j["divergence"] = {{"epoch", s.divergence->epoch}, {"batch", s.divergence->batch},
                           {"message", s.divergence->message}};
    j["final"] = metrics_json(s.final_metrics);
    j["final"]["accuracy_before_prune"] = s.accuracy_before_prune;
    j["final"]["bimodality_mid_mass"] = s.bimodality;
    j["histogram"] = {{"bins", s.histogram.counts.size()}, {"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
    j["pruned_player_ids"] = s.pruned_players;
    j["wall_clock_seconds"] = s.wall_seconds;
    return j;
}

void write_run_outputs(const ExperimentConfig& cfg, const TrainResult& result) {
    const auto dir = cfg.run_dir();
    std::filesystem::create_directories(dir);
    const std::string config_json = config_to_json(cfg).dump();
    write_file_atomic(dir / "metrics.csv", metrics_csv(result.metrics));
    write_file_atomic(dir / "participation.csv", participation_csv(result.net));
    save_checkpoint(dir / "checkpoint.bin", result.net, config_json);
    write_file_atomic(dir / "summary.json", summary_json(cfg, result).dump(2) + "\n");
}

} // namespace eqprune
