#pragma once

// Joint training: every mini-batch takes one SGD step on the weights and
// one projected utility-ascent step on the participation gates, both
// driven by the same backward pass. After the last epoch every gate below
// epsilon is closed for good.

#include "eqprune/game.hpp"
#include "eqprune/mnist.hpp"
#include "eqprune/net.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eqprune {

/// How the benefit inner product enters the utility.
enum class BenefitMode { signed_value, absolute };
/// Which gradient the benefit inner product uses.
enum class BenefitGradient { raw, effective };

std::string_view to_string(BenefitMode m);
std::string_view to_string(BenefitGradient g);
BenefitMode parse_benefit_mode(std::string_view text);
BenefitGradient parse_benefit_gradient(std::string_view text);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double lr_theta = 0.1;
    std::uint64_t seed = 42;
    game::GameConfig game;
    BenefitMode benefit_mode = BenefitMode::signed_value;
    BenefitGradient benefit_gradient = BenefitGradient::raw;
    std::size_t s_update_every = 1;

    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double sparsity = 0.0;
    double mean_participation = 0.0;
    std::size_t active_neurons = 0;
    double equilibrium_residual = 0.0;
};

struct Histogram {
    std::vector<double> edges;         // bins + 1 values, uniform on [0, 1]
    std::vector<std::size_t> counts;   // bins values
};

struct Divergence {
    std::size_t epoch = 0;  // 1-based
    std::size_t batch = 0;  // 0-based within the epoch
    std::string message;
};

struct RunSummary {
    EpochMetrics final_metrics;        // after finalize_prune
    double accuracy_before_prune = 0.0;
    double bimodality = 0.0;           // share of gates in (0.05, 0.95)
    Histogram histogram;               // 32 bins of the final gates
    std::vector<std::size_t> pruned_players;
    double wall_seconds = 0.0;
    std::optional<Divergence> divergence;
};

struct TrainResult {
    ParticipatingNet net;
    std::vector<EpochMetrics> metrics;
    RunSummary summary;
};

struct TrainHooks {
    std::function<void(const EpochMetrics&)> on_epoch;
};

/// Per-player game statistics from one backward pass. Norms are taken
/// over each neuron's incoming row plus bias; competition is only
/// computed when eta > 0 and only within a layer.
game::PlayerStats collect_player_stats(const ParticipatingNet& net, const GradientBundle& grads,
                                       const TrainConfig& cfg);

TrainResult train(ParticipatingNet net, const mnist::Dataset& train_data, const mnist::Dataset& test_data,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Closes every gate below epsilon and zeroes that neuron's incoming
/// row and bias. Returns the closed player ids.
std::vector<std::size_t> finalize_prune(ParticipatingNet& net, double epsilon);

struct SparsityReport {
    double sparsity;
    std::size_t active;
};

SparsityReport compute_sparsity(std::span<const double> s, double epsilon);

Histogram participation_histogram(std::span<const double> s, std::size_t bins);

/// Share of gates strictly inside (lo, hi).
double middle_mass(std::span<const double> s, double lo = 0.05, double hi = 0.95);

} // namespace eqprune
