#pragma once

// The participation game. Player i chooses s_i in [0, 1] and receives
//
//   U_i = alpha * s_i * g_i
//         - (beta * |theta_i|^2 * s_i^2 + gamma * |s_i| + eta * s_i * c_i)
//
// where g_i = <dL/d theta_i, theta_i> is the linearized benefit and
// c_i = sum_{j != i} s_j <theta_i, theta_j> the competition from its layer.
// Everything here is a pure function of the profile s and frozen statistics.

#include <cstddef>
#include <span>
#include <vector>

namespace eqprune::game {

struct GameConfig {
    double alpha = 1.0;
    double beta = 0.0;    // L2 cost
    double gamma = 0.0;   // L1 cost
    double eta = 0.0;     // competition
    double lr_s = 0.001;  // participation step size
    double epsilon = 0.01;  // prune threshold

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Frozen per-player quantities for one evaluation of the game.
struct PlayerTerms {
    double benefit = 0.0;      // g_i
    double norm_sq = 0.0;      // |theta_i|^2
    double competition = 0.0;  // c_i
};

struct PlayerStats {
    std::vector<double> benefit;
    std::vector<double> norm_sq;
    std::vector<double> competition;  // all zeros when eta == 0

    std::size_t size() const noexcept { return benefit.size(); }
    PlayerTerms terms(std::size_t i) const noexcept { return {benefit[i], norm_sq[i], competition[i]}; }
    void validate() const;
};

/// U_i as a function of the player's own strategy.
double utility_at(double s_i, const PlayerTerms& t, const GameConfig& cfg) noexcept;
/// dU_i/ds_i with sign(0) = 0.
double utility_gradient_at(double s_i, const PlayerTerms& t, const GameConfig& cfg) noexcept;
/// alpha * g_i - gamma - eta * c_i: positive iff participating can pay off.
double net_incentive(const PlayerTerms& t, const GameConfig& cfg) noexcept;
/// Closed-form maximizer of utility_at over [0, 1] (soft threshold, then clamp).
double best_response_at(const PlayerTerms& t, const GameConfig& cfg) noexcept;

double utility(std::size_t i, std::span<const double> s, const PlayerStats& stats, const GameConfig& cfg);
double utility_gradient(std::size_t i, std::span<const double> s, const PlayerStats& stats,
                        const GameConfig& cfg);
double best_response(std::size_t i, std::span<const double> s, const PlayerStats& stats,
                     const GameConfig& cfg);

/// alpha * g_i < gamma + eta * c_i
bool is_pruned_at_equilibrium(std::size_t i, std::span<const double> s, const PlayerStats& stats,
                              const GameConfig& cfg);

struct ParticipationState {
    std::vector<double> s;

    std::size_t size() const noexcept { return s.size(); }
};

/// One synchronous projected-gradient-ascent step for every player,
/// all reading the same pre-update profile.
ParticipationState update_participation(const ParticipationState& state, const PlayerStats& stats,
                                        const GameConfig& cfg);

/// One synchronous best-response step.
ParticipationState best_response_step(const ParticipationState& state, const PlayerStats& stats,
                                      const GameConfig& cfg);

/// max_i |s_i - best_response_i|
double equilibrium_residual(const ParticipationState& state, const PlayerStats& stats, const GameConfig& cfg);

/// Competition range for dominance testing.
struct CompetitionRange {
    double min = 0.0;
    double max = 0.0;
};

/// True iff U_i(0) > U_i(s) for every grid strategy s > 0 and every
/// competition value on a grid over `range`. `grid_points` >= 2 spans [0, 1].
bool dominance_check(std::size_t i, const PlayerStats& stats, const GameConfig& cfg, std::size_t grid_points,
                     CompetitionRange range);

/// Same competition-matrix convention as used by the trainer:
/// c_i = sum_{j != i} s_j * gram(i, j) over players of one layer.
std::vector<double> competition_from_gram(std::span<const double> gram, std::span<const double> s);

} // namespace eqprune::game
