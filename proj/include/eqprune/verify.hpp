#pragma once

// Independent oracles for the game and the network: brute-force grid
// search, central finite differences over a naive reference forward pass,
// and an analytic solver for games without competition. Nothing here calls
// into the code it checks; only DenseMatrix and the plain data types are
// shared.

#include "eqprune/game.hpp"
#include "eqprune/net.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eqprune::verify {

struct GridSpec {
    std::size_t points = 10001;  // on [0, 1], endpoints included
    double step = 1e-5;          // finite-difference perturbation

    void validate() const;
};

/// Grid point maximizing player i's utility; ties go to the smaller s.
double grid_argmax_utility(std::size_t i, std::span<const double> s, const game::PlayerStats& stats,
                           const game::GameConfig& cfg, const GridSpec& grid);

/// Exhaustive 2-D grid version of the dominance test: every grid s > 0
/// against every one of `competition_points` values spanning [c_min, c_max].
bool grid_dominance(std::size_t i, const game::PlayerStats& stats, const game::GameConfig& cfg,
                    std::size_t s_points, std::size_t competition_points, double c_min, double c_max);

/// Exact equilibrium of a game with eta = 0 (players decoupled).
game::ParticipationState solve_decoupled_game(const game::PlayerStats& stats, const game::GameConfig& cfg);

/// Logits via plain nested loops, gates applied as ReLU(s * (Wx + b)).
/// No range checks on s, so gates may be nudged past 1 for differencing.
DenseMatrix reference_logits(const ParticipatingNet& net, const DenseMatrix& batch);
double reference_loss(const ParticipatingNet& net, const DenseMatrix& batch, std::span<const std::uint8_t> labels);

/// Central differences for every weight and bias, for the group-scaling
/// direction of each player (benefit_raw), and for each gate
/// (benefit_effective). O(parameters) forward passes: toy nets only.
GradientBundle finite_diff_loss_grad(const ParticipatingNet& net, const DenseMatrix& batch,
                                     std::span<const std::uint8_t> labels, double step);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-7);

struct GradientComparison {
    double max_relative_error = 0.0;
    std::string worst_entry;  // e.g. "hidden[0].weights(2,3)"
};

GradientComparison compare_gradients(const GradientBundle& analytic, const GradientBundle& numeric,
                                     double floor = 1e-7);

// --- suites shared by the CLI and the test binaries -------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // metric on success; replayable inputs on failure
};

std::vector<CheckResult> gradient_suite(std::uint64_t seed = 7);
std::vector<CheckResult> game_suite(std::uint64_t seed = 11);
std::vector<CheckResult> data_suite();

} // namespace eqprune::verify
