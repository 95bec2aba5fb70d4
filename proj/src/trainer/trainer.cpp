#include "eqprune/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace eqprune {

std::string_view to_string(BenefitMode m) { return m == BenefitMode::absolute ? "abs" : "signed"; }
std::string_view to_string(BenefitGradient g) { return g == BenefitGradient::effective ? "effective" : "raw"; }

BenefitMode parse_benefit_mode(std::string_view text) {
    if (text == "signed") return BenefitMode::signed_value;
    if (text == "abs") return BenefitMode::absolute;
    throw std::invalid_argument("benefit_mode must be signed or abs, got '" + std::string(text) + "'");
}

BenefitGradient parse_benefit_gradient(std::string_view text) {
    if (text == "raw") return BenefitGradient::raw;
    if (text == "effective") return BenefitGradient::effective;
    throw std::invalid_argument("benefit_gradient must be raw or effective, got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(lr_theta > 0.0) || !std::isfinite(lr_theta)) throw std::invalid_argument("lr_theta must be positive");
    if (s_update_every < 1) throw std::invalid_argument("s_update_every must be at least 1");
    game.validate();
}

game::PlayerStats collect_player_stats(const ParticipatingNet& net, const GradientBundle& grads,
                                       const TrainConfig& cfg) {
    const std::size_t n = net.num_players();
    game::PlayerStats stats;
    const auto& source = cfg.benefit_gradient == BenefitGradient::raw ? grads.benefit_raw : grads.benefit_effective;
    stats.benefit.assign(source.begin(), source.end());
    if (cfg.benefit_mode == BenefitMode::absolute)
        for (double& g : stats.benefit) g = std::abs(g);
    stats.norm_sq.resize(n);
    stats.competition.assign(n, 0.0);

    std::size_t player = 0;
    for (const auto& layer : net.hidden()) {
        const std::size_t first = player;
        for (std::size_t i = 0; i < layer.outputs(); ++i, ++player)
            stats.norm_sq[player] = row_dot(layer.weights, i, layer.weights, i) + layer.biases[i] * layer.biases[i];
        if (cfg.game.eta > 0.0) {
            // gram(i, j) = <theta_i, theta_j> over row and bias
            DenseMatrix gram = matmul_transposed_b(layer.weights, layer.weights);
            for (std::size_t i = 0; i < layer.outputs(); ++i)
                for (std::size_t j = 0; j < layer.outputs(); ++j) gram(i, j) = gram(i, j) + layer.biases[i] * layer.biases[j];
            const auto c = game::competition_from_gram(gram.data(), layer.participation);
            std::copy(c.begin(), c.end(), stats.competition.begin() + static_cast<std::ptrdiff_t>(first));
        }
    }
    return stats;
}

std::vector<std::size_t> finalize_prune(ParticipatingNet& net, double epsilon) {
    std::vector<std::size_t> pruned;
    for (std::size_t id = 0; id < net.num_players(); ++id) {
        const auto ref = net.players()[id];
        auto& layer = net.hidden()[ref.layer];
        if (layer.participation[ref.neuron] < epsilon) {
            layer.participation[ref.neuron] = 0.0;
            std::fill(layer.weights.row(ref.neuron).begin(), layer.weights.row(ref.neuron).end(), 0.0);
            layer.biases[ref.neuron] = 0.0;
            pruned.push_back(id);
        }
    }
    return pruned;
}

SparsityReport compute_sparsity(std::span<const double> s, double epsilon) {
    if (s.empty()) return {0.0, 0};
    const auto below = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return v < epsilon; }));
    return {static_cast<double>(below) / static_cast<double>(s.size()), s.size() - below};
}

Histogram participation_histogram(std::span<const double> s, std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("participation_histogram: need at least 2 bins");
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = static_cast<double>(k) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : s) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        const auto bin = std::min(bins - 1, static_cast<std::size_t>(clamped * static_cast<double>(bins)));
        ++h.counts[bin];
    }
    return h;
}

double middle_mass(std::span<const double> s, double lo, double hi) {
    if (s.empty()) return 0.0;
    const auto inside = std::count_if(s.begin(), s.end(), [&](double v) { return v > lo && v < hi; });
    return static_cast<double>(inside) / static_cast<double>(s.size());
}

namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr std::uint64_t kBatchStream = 0x6a09e667f3bcc909ULL;

void sgd_step(ParticipatingNet& net, const GradientBundle& grads, double lr) {
    for (std::size_t l = 0; l < net.hidden().size(); ++l) {
        auto& layer = net.hidden()[l];
        axpy(-lr, grads.hidden[l].weights.data(), layer.weights.data());
        axpy(-lr, grads.hidden[l].biases, layer.biases);
    }
    axpy(-lr, grads.output.weights.data(), net.output().weights.data());
    axpy(-lr, grads.output.biases, net.output().biases);
}

EpochMetrics measure(const ParticipatingNet& net, const mnist::Dataset& test_data, const game::PlayerStats& stats,
                     const TrainConfig& cfg, std::size_t epoch, double train_loss) {
    const auto s = net.participation();
    const auto report = compute_sparsity(s, cfg.game.epsilon);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = train_loss;
    m.test_accuracy = accuracy(net, test_data);
    m.sparsity = report.sparsity;
    m.active_neurons = report.active;
    double total = 0.0;
    for (double v : s) total += v;
    m.mean_participation = s.empty() ? 0.0 : total / static_cast<double>(s.size());
    m.equilibrium_residual = stats.size() == s.size()
                                 ? game::equilibrium_residual(game::ParticipationState{s}, stats, cfg.game)
                                 : 0.0;
    return m;
}

} // namespace

TrainResult train(ParticipatingNet net, const mnist::Dataset& train_data, const mnist::Dataset& test_data,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (train_data.images.cols() != net.input_size() || test_data.images.cols() != net.input_size())
        throw std::invalid_argument("train: dataset width does not match the network input");

    const auto started = std::chrono::steady_clock::now();
    Rng batch_rng(cfg.seed ^ kBatchStream);
    mnist::BatchPlan plan(train_data.size(), cfg.batch_size);
    const std::size_t batches = plan.batches_per_epoch();

    std::vector<EpochMetrics> history;
    RunSummary summary;
    game::PlayerStats last_stats;
    std::size_t global_batch = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs && !summary.divergence; ++epoch) {
        double loss_total = 0.0;
        for (std::size_t b = 0; b < batches; ++b, ++global_batch) {
            const auto batch = mnist::next_batch(train_data, plan, batch_rng);
            LossAndGradients step;
            try {
                step = loss_and_backward(net, batch.images, batch.labels);
            } catch (const NonFiniteLoss& e) {
                summary.divergence = Divergence{epoch, b, e.what()};
                break;
            }
            if (std::abs(step.loss) > kDivergenceLimit) {
                summary.divergence = Divergence{epoch, b, "loss " + std::to_string(step.loss) + " exceeds divergence limit"};
                break;
            }
            loss_total += step.loss;

            const bool update_gates = (global_batch + 1) % cfg.s_update_every == 0;
            if (update_gates || b + 1 == batches) last_stats = collect_player_stats(net, step.grads, cfg);

            sgd_step(net, step.grads, cfg.lr_theta);

            if (update_gates) {
                const auto next = game::update_participation(game::ParticipationState{net.participation()},
                                                             last_stats, cfg.game);
                net.set_participation(next.s);
            }
        }
        if (summary.divergence) break;
        history.push_back(measure(net, test_data, last_stats, cfg, epoch, loss_total / static_cast<double>(batches)));
        if (hooks.on_epoch) hooks.on_epoch(history.back());
    }

    if (!summary.divergence) {
        summary.accuracy_before_prune = history.back().test_accuracy;
        summary.pruned_players = finalize_prune(net, cfg.game.epsilon);
        summary.final_metrics = measure(net, test_data, last_stats, cfg, history.back().epoch, history.back().train_loss);
    } else if (!history.empty()) {
        summary.final_metrics = history.back();
        summary.accuracy_before_prune = history.back().test_accuracy;
    }
    const auto s = net.participation();
    summary.histogram = participation_histogram(s, 32);
    summary.bimodality = middle_mass(s);
    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(net), std::move(history), std::move(summary)};
}

} // namespace eqprune
