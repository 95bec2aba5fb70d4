#include "eqprune/game.hpp"
#include "eqprune/numkit.hpp"
#include "eqprune/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace eqprune;
using namespace eqprune::game;

namespace {

GameConfig make_cfg(double alpha, double beta, double gamma, double eta, double lr_s = 0.001) {
    GameConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.gamma = gamma;
    c.eta = eta;
    c.lr_s = lr_s;
    return c;
}

PlayerStats one(double g, double norm_sq, double competition = 0.0) { return {{g}, {norm_sq}, {competition}}; }

PlayerStats random_stats(Rng& rng, std::size_t n, bool competition) {
    PlayerStats st;
    for (std::size_t i = 0; i < n; ++i) {
        st.benefit.push_back(rng_uniform(rng, -1.0, 1.0));
        st.norm_sq.push_back(rng.next_unit() < 0.1 ? 0.0 : rng_uniform(rng, 0.01, 5.0));
        st.competition.push_back(competition ? rng_uniform(rng, -1.0, 1.0) : 0.0);
    }
    return st;
}

} // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(make_cfg(1, 0.1, 0, 0).validate());
    CHECK_THROWS(make_cfg(-1, 0, 0, 0).validate());
    CHECK_THROWS(make_cfg(1, -0.1, 0, 0).validate());
    CHECK_THROWS(make_cfg(1, 0, std::nan(""), 0).validate());
    auto c = make_cfg(1, 0, 0, 0);
    c.epsilon = 1.0;
    CHECK_THROWS(c.validate());
    CHECK_THROWS(PlayerStats{{1.0}, {-1.0}, {0.0}}.validate());
    CHECK_THROWS(PlayerStats{{1.0}, {1.0, 2.0}, {0.0}}.validate());
}

TEST_CASE("utility hand evaluations") {
    const std::vector<double> zero{0.0};
    CHECK(utility(0, zero, one(3.0, 2.0, 1.0), make_cfg(1, 0.3, 0.2, 0.1)) == 0.0);
    const std::vector<double> s1{1.0};
    CHECK(utility(0, s1, one(2.0, 1.0), make_cfg(1, 1, 0, 0)) == doctest::Approx(1.0));
    const std::vector<double> half{0.5};
    CHECK(utility(0, half, one(0.0, 0.0), make_cfg(1, 0, 0.1, 0)) == doctest::Approx(-0.05));
    CHECK(utility(0, half, one(1.0, 2.0, 3.0), make_cfg(1, 0, 0, 0.5)) == doctest::Approx(0.5 - 0.75));
}

TEST_CASE("utility gradient") {
    const std::vector<double> s{0.25};
    CHECK(utility_gradient(0, s, one(1.0, 2.0), make_cfg(1, 0.5, 0, 0)) == doctest::Approx(0.5));
    const std::vector<double> zero{0.0};
    const auto cfg = make_cfg(1, 0, 0.05, 0);
    CHECK(utility_gradient(0, zero, one(0.0, 1.0), cfg) == 0.0);
    CHECK(utility_at(1e-4, {0.0, 1.0, 0.0}, cfg) < utility_at(0.0, {0.0, 1.0, 0.0}, cfg));

    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = make_cfg(rng_uniform(rng, 0.1, 2), rng_uniform(rng, 0, 0.5), rng_uniform(rng, 0, 0.2),
                                rng_uniform(rng, 0, 0.3));
        const PlayerTerms t{rng_uniform(rng, -1, 1), rng_uniform(rng, 0, 4), rng_uniform(rng, -1, 1)};
        const double x = rng_uniform(rng, 0.01, 0.99), h = 1e-6;
        const double fd = (utility_at(x + h, t, c) - utility_at(x - h, t, c)) / (2 * h);
        CHECK(std::abs(utility_gradient_at(x, t, c) - fd) < 1e-8);
    }
}

TEST_CASE("best response cases") {
    const std::vector<double> s{0.7};
    CHECK(best_response(0, s, one(1.0, 1.0), make_cfg(1, 0.4, 0.2, 0)) == doctest::Approx(1.0));
    CHECK(best_response(0, s, one(0.4, 1.0), make_cfg(1, 0.5, 0, 0)) == doctest::Approx(0.4));
    CHECK(best_response(0, s, one(0.1, 1.0), make_cfg(1, 0.5, 0.1, 0)) == 0.0);
    CHECK(best_response(0, s, one(-0.5, 1.0), make_cfg(1, 0.5, 0, 0)) == 0.0);
    CHECK(best_response(0, s, one(0.3, 0.0), make_cfg(1, 0.5, 0.1, 0)) == 1.0);
    CHECK(best_response(0, s, one(0.1, 0.0), make_cfg(1, 0.5, 0.1, 0)) == 0.0);
    CHECK(best_response(0, s, one(0.3, 2.0), make_cfg(1, 0.0, 0.1, 0)) == 1.0);
    CHECK(best_response(0, s, one(0.5, 1.0, 2.0), make_cfg(1, 0.5, 0, 0.2)) == doctest::Approx(0.1));
}

TEST_CASE("grid oracle examples") {
    const verify::GridSpec grid;
    const std::vector<double> s{0.5};
    CHECK(verify::grid_argmax_utility(0, s, one(-1.0, 1.0), make_cfg(1, 0.1, 0.1, 0), grid) == 0.0);
    // alpha g = 0.8, 2 beta |theta|^2 = 2: vertex at 0.4
    CHECK(verify::grid_argmax_utility(0, s, one(0.8, 1.0), make_cfg(1, 1, 0, 0), grid) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK_THROWS(verify::GridSpec{50, 1e-5}.validate());
    CHECK_THROWS(verify::GridSpec{101, 1e-2}.validate());
}

TEST_CASE("best response agrees with grid argmax and the pruning condition") {
    Rng rng(22);
    const verify::GridSpec grid;
    const double regimes[4][2] = {{0.1, 0.0}, {0.5, 0.0}, {0.001, 0.1}, {0.05, 0.05}};
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = make_cfg(1.0, regimes[trial % 4][0], regimes[trial % 4][1], 0.0);
        const auto st = one(rng_uniform(rng, -0.5, 1.0), rng_uniform(rng, 0.0, 4.0));
        const std::vector<double> s{rng.next_unit()};
        const double br = best_response(0, s, st, c);
        CHECK(std::abs(br - verify::grid_argmax_utility(0, s, st, c, grid)) <= 2e-4);
        CHECK(is_pruned_at_equilibrium(0, s, st, c) == (br == 0.0));
        CHECK((br > 0.0) == (net_incentive(st.terms(0), c) > 0.0));
    }
}

TEST_CASE("pruning condition") {
    const std::vector<double> s{1.0};
    CHECK(is_pruned_at_equilibrium(0, s, one(0.0, 1.0), make_cfg(1, 0, 0.1, 0)));
    CHECK_FALSE(is_pruned_at_equilibrium(0, s, one(1.0, 1.0), make_cfg(1, 0, 0, 0)));
}

TEST_CASE("participation update") {
    const auto cfg = make_cfg(1, 0, 0, 0);
    const ParticipationState st{{0.2, 0.5, 1.0}};
    CHECK(update_participation(st, PlayerStats{{0, 0, 0}, {1, 1, 1}, {0, 0, 0}}, cfg).s == st.s);

    // gradient -1 from the L1 term
    const ParticipationState low{{0.0005}};
    CHECK(update_participation(low, one(0.0, 0.0), make_cfg(1, 0, 1.0, 0)).s[0] == 0.0);
    const ParticipationState top{{1.0}};
    CHECK(update_participation(top, one(5.0, 0.0), cfg).s[0] == 1.0);

    Rng rng(23);
    auto random_state = ParticipationState{std::vector<double>(50)};
    for (double& v : random_state.s) v = rng.next_unit();
    const auto st2 = random_stats(rng, 50, true);
    const auto big_step = make_cfg(1, 0.3, 0.1, 0.2, 5.0);
    for (int k = 0; k < 100; ++k) {
        random_state = update_participation(random_state, st2, big_step);
        for (double v : random_state.s) REQUIRE((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("updates are synchronous") {
    const ParticipationState st{{0.5, 0.5}};
    const PlayerStats stats{{0.2, -0.2}, {1.0, 1.0}, {0.3, 0.1}};
    const auto cfg = make_cfg(1, 0.1, 0.0, 0.5, 0.1);
    const auto next = update_participation(st, stats, cfg);
    CHECK(next.s[0] == doctest::Approx(0.5 + 0.1 * utility_gradient(0, st.s, stats, cfg)));
    CHECK(next.s[1] == doctest::Approx(0.5 + 0.1 * utility_gradient(1, st.s, stats, cfg)));
}

TEST_CASE("equilibrium residual") {
    const auto cfg = make_cfg(1, 0.1, 0.1, 0);
    const PlayerStats zeros{{0, 0, 0}, {1, 1, 1}, {0, 0, 0}};
    CHECK(equilibrium_residual({{1.0, 1.0, 1.0}}, zeros, cfg) == 1.0);

    Rng rng(24);
    for (int trial = 0; trial < 50; ++trial) {
        const auto st = random_stats(rng, 1 + rng.next_below(64), false);
        ParticipationState s{std::vector<double>(st.size(), 1.0)};
        double prev = equilibrium_residual(s, st, cfg);
        for (int k = 0; k < 4; ++k) {
            s = best_response_step(s, st, cfg);
            const double r = equilibrium_residual(s, st, cfg);
            CHECK(r <= prev);
            prev = r;
        }
        CHECK(prev < 1e-12);
        const auto exact = verify::solve_decoupled_game(st, cfg);
        CHECK(exact.s == s.s);
        CHECK(equilibrium_residual(exact, st, cfg) == 0.0);
    }
}

TEST_CASE("equilibrium points under projected ascent") {
    Rng rng(25);
    const auto cfg = make_cfg(1, 0.2, 0.05, 0);
    const auto st = random_stats(rng, 64, false);
    const auto eq = verify::solve_decoupled_game(st, cfg);
    const auto next = update_participation(eq, st, cfg);
    for (std::size_t i = 0; i < eq.size(); ++i) {
        const double g = st.benefit[i];
        if (eq.s[i] > 0.0) {
            CHECK(next.s[i] == doctest::Approx(eq.s[i]).epsilon(1e-12));
        } else if (g <= 0.0) {
            CHECK(next.s[i] == 0.0);
        } else {
            // sign(0) = 0: a closed gate with 0 < alpha g <= gamma is nudged open by lr_s * alpha * g
            CHECK(next.s[i] == doctest::Approx(cfg.lr_s * g).epsilon(1e-12));
        }
    }
}

TEST_CASE("decoupled solver") {
    PlayerStats st{{-0.5, 0.0, -0.1}, {1, 2, 0}, {0, 0, 0}};
    const auto out = verify::solve_decoupled_game(st, make_cfg(1, 0.1, 0.05, 0));
    CHECK(out.s == std::vector<double>{0, 0, 0});
    CHECK_THROWS(verify::solve_decoupled_game(st, make_cfg(1, 0.1, 0.05, 0.1)));
}

TEST_CASE("dominance") {
    CHECK(dominance_check(0, one(-0.2, 1.0), make_cfg(1, 0, 0.1, 0), 101, {0, 0}));
    CHECK(dominance_check(0, one(0.0, 1.0), make_cfg(1, 0, 0.1, 0), 1001, {0, 0}));
    CHECK_FALSE(dominance_check(0, one(5.0, 0.1), make_cfg(1, 0.001, 0.001, 0.001), 101, {0, 1}));

    Rng rng(26);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = make_cfg(1, rng_uniform(rng, 0, 0.5), rng_uniform(rng, 0, 0.2), rng_uniform(rng, 0, 0.3));
        const auto st = one(rng_uniform(rng, -0.5, 0.5), rng_uniform(rng, 0, 2));
        const double lo = rng_uniform(rng, -1, 1), hi = lo + rng.next_unit();
        CHECK(dominance_check(0, st, c, 101, {lo, hi}) == verify::grid_dominance(0, st, c, 101, 101, lo, hi));
    }
}

TEST_CASE("competition from a Gram matrix") {
    // gram is row-major n x n; c_i = sum_{j != i} s_j <theta_i, theta_j>
    const std::vector<double> gram{4, 1, 2, 1, 9, 3, 2, 3, 16};
    const std::vector<double> s{1.0, 0.5, 0.0};
    const auto c = competition_from_gram(gram, s);
    CHECK(c == std::vector<double>{0.5, 1.0, 2.0 + 1.5});
}

TEST_CASE("zero-benefit collapse arithmetic") {
    // g = 0, gamma = 0.05, lr_s = 0.001: each update subtracts 5e-5 in floating point.
    const auto cfg = make_cfg(1, 0, 0.05, 0, 0.001);
    const PlayerStats st{{0, 0}, {1.5, 0.2}, {0, 0}};
    ParticipationState s{{1.0, 1.0}};
    std::size_t first_zero = 0;
    for (std::size_t k = 1; k <= 25000; ++k) {
        const auto prev = s.s[0];
        s = update_participation(s, st, cfg);
        if (prev > 0.0) REQUIRE(s.s[0] < prev);
        if (s.s[0] == 0.0 && first_zero == 0) first_zero = k;
        if (first_zero != 0) REQUIRE(s.s[0] == 0.0);
        REQUIRE(s.s[0] == s.s[1]);
    }
    // Exact arithmetic gives 20,000; the rounded decrements leave ~1e-13 behind.
    CHECK(first_zero == 20001);
}
