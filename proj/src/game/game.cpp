#include "eqprune/game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace eqprune::game {

void GameConfig::validate() const {
    auto require = [](bool ok, const char* what, double v) {
        if (!ok) throw std::invalid_argument(std::string(what) + " = " + std::to_string(v) + " is out of range");
    };
    require(std::isfinite(alpha) && alpha >= 0.0, "alpha", alpha);
    require(std::isfinite(beta) && beta >= 0.0, "beta", beta);
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma", gamma);
    require(std::isfinite(eta) && eta >= 0.0, "eta", eta);
    require(std::isfinite(lr_s) && lr_s >= 0.0, "lr_s", lr_s);
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon", epsilon);
}

void PlayerStats::validate() const {
    if (norm_sq.size() != benefit.size() || competition.size() != benefit.size())
        throw std::invalid_argument("PlayerStats: benefit/norm_sq/competition lengths differ");
    for (std::size_t i = 0; i < benefit.size(); ++i) {
        if (!std::isfinite(benefit[i]) || !std::isfinite(norm_sq[i]) || !std::isfinite(competition[i]))
            throw std::invalid_argument("PlayerStats: non-finite entry for player " + std::to_string(i));
        if (norm_sq[i] < 0.0)
            throw std::invalid_argument("PlayerStats: negative norm for player " + std::to_string(i));
    }
}

double utility_at(double s_i, const PlayerTerms& t, const GameConfig& cfg) noexcept {
    const double benefit = cfg.alpha * s_i * t.benefit;
    const double cost = cfg.beta * t.norm_sq * s_i * s_i + cfg.gamma * std::abs(s_i) + cfg.eta * s_i * t.competition;
    return benefit - cost;
}

double utility_gradient_at(double s_i, const PlayerTerms& t, const GameConfig& cfg) noexcept {
    const double sign = s_i > 0.0 ? 1.0 : (s_i < 0.0 ? -1.0 : 0.0);
    return cfg.alpha * t.benefit - 2.0 * cfg.beta * t.norm_sq * s_i - cfg.gamma * sign - cfg.eta * t.competition;
}

double net_incentive(const PlayerTerms& t, const GameConfig& cfg) noexcept {
    return cfg.alpha * t.benefit - cfg.gamma - cfg.eta * t.competition;
}

double best_response_at(const PlayerTerms& t, const GameConfig& cfg) noexcept {
    // Same comparison as the pruning condition, so the two only part ways
    // on an exact tie.
    if (!(cfg.alpha * t.benefit > cfg.gamma + cfg.eta * t.competition)) return 0.0;
    const double curvature = 2.0 * cfg.beta * t.norm_sq;
    if (!(curvature > 0.0)) return 1.0;
    return std::clamp(net_incentive(t, cfg) / curvature, 0.0, 1.0);
}

namespace {

void check_index(std::size_t i, std::span<const double> s, const PlayerStats& stats) {
    if (i >= stats.size() || s.size() != stats.size())
        throw std::out_of_range("player " + std::to_string(i) + " with " + std::to_string(s.size()) +
                                " strategies and " + std::to_string(stats.size()) + " stat entries");
}

void check_sizes(const ParticipationState& state, const PlayerStats& stats) {
    if (state.size() != stats.size())
        throw std::invalid_argument("participation state has " + std::to_string(state.size()) +
                                    " players, stats have " + std::to_string(stats.size()));
}

} // namespace

double utility(std::size_t i, std::span<const double> s, const PlayerStats& stats, const GameConfig& cfg) {
    check_index(i, s, stats);
    return utility_at(s[i], stats.terms(i), cfg);
}

double utility_gradient(std::size_t i, std::span<const double> s, const PlayerStats& stats, const GameConfig& cfg) {
    check_index(i, s, stats);
    return utility_gradient_at(s[i], stats.terms(i), cfg);
}

double best_response(std::size_t i, std::span<const double> s, const PlayerStats& stats, const GameConfig& cfg) {
    check_index(i, s, stats);
    return best_response_at(stats.terms(i), cfg);
}

bool is_pruned_at_equilibrium(std::size_t i, std::span<const double> s, const PlayerStats& stats,
                              const GameConfig& cfg) {
    check_index(i, s, stats);
    const auto t = stats.terms(i);
    return cfg.alpha * t.benefit < cfg.gamma + cfg.eta * t.competition;
}

ParticipationState update_participation(const ParticipationState& state, const PlayerStats& stats,
                                        const GameConfig& cfg) {
    check_sizes(state, stats);
    ParticipationState next{std::vector<double>(state.size())};
    for (std::size_t i = 0; i < state.size(); ++i) {
        const double step = cfg.lr_s * utility_gradient_at(state.s[i], stats.terms(i), cfg);
        next.s[i] = std::clamp(state.s[i] + step, 0.0, 1.0);
    }
    return next;
}

ParticipationState best_response_step(const ParticipationState& state, const PlayerStats& stats,
                                      const GameConfig& cfg) {
    check_sizes(state, stats);
    ParticipationState next{std::vector<double>(state.size())};
    for (std::size_t i = 0; i < state.size(); ++i) next.s[i] = best_response_at(stats.terms(i), cfg);
    return next;
}

double equilibrium_residual(const ParticipationState& state, const PlayerStats& stats, const GameConfig& cfg) {
    check_sizes(state, stats);
    double worst = 0.0;
    for (std::size_t i = 0; i < state.size(); ++i)
        worst = std::max(worst, std::abs(state.s[i] - best_response_at(stats.terms(i), cfg)));
    return worst;
}

bool dominance_check(std::size_t i, const PlayerStats& stats, const GameConfig& cfg, std::size_t grid_points,
                     CompetitionRange range) {
    if (i >= stats.size()) throw std::out_of_range("dominance_check: player " + std::to_string(i));
    if (grid_points < 2) throw std::invalid_argument("dominance_check: need at least two grid points");
    if (!(range.min <= range.max)) throw std::invalid_argument("dominance_check: empty competition range");
    // U is non-increasing in the competition value for s > 0 (eta >= 0), so
    // the least favourable opponent profile for s_i = 0 is range.min.
    PlayerTerms t = stats.terms(i);
    t.competition = range.min;
    const double steps = static_cast<double>(grid_points - 1);
    for (std::size_t k = 1; k < grid_points; ++k) {
        if (!(utility_at(static_cast<double>(k) / steps, t, cfg) < 0.0)) return false;
    }
    return true;
}

std::vector<double> competition_from_gram(std::span<const double> gram, std::span<const double> s) {
    const std::size_t n = s.size();
    if (gram.size() != n * n) throw std::invalid_argument("competition_from_gram: gram is not n x n");
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) acc += s[j] * gram[i * n + j];
        c[i] = acc;
    }
    return c;
}

} // namespace eqprune::game
