#include "eqprune/experiment.hpp"
#include "eqprune/trainer.hpp"

#include <doctest.h>

#include <cmath>

using namespace eqprune;

namespace {

// Three Gaussian blobs in 12 dimensions, squashed into [0, 1].
mnist::Dataset blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix centers(3, 12);
    Rng crng(99);
    for (double& v : centers.data()) v = rng_uniform(crng, 0.2, 0.8);
    mnist::Dataset ds{DenseMatrix(n, 12), std::vector<std::uint8_t>(n)};
    for (std::size_t r = 0; r < n; ++r) {
        const auto y = static_cast<std::uint8_t>(rng.next_below(3));
        ds.labels[r] = y;
        for (std::size_t c = 0; c < 12; ++c)
            ds.images(r, c) = std::clamp(centers(y, c) + 0.1 * rng.next_normal(), 0.0, 1.0);
    }
    return ds;
}

ParticipatingNet small_net(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t sizes[] = {12, 16, 8, 3};
    return ParticipatingNet::create(sizes, rng);
}

TrainConfig small_cfg() {
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.lr_theta = 0.1;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("config validation") {
    auto cfg = small_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;
    CHECK_THROWS(cfg.validate());
    cfg = small_cfg();
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = small_cfg();
    cfg.lr_theta = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = small_cfg();
    cfg.s_update_every = 0;
    CHECK_THROWS(cfg.validate());
    CHECK(parse_benefit_mode("abs") == BenefitMode::absolute);
    CHECK(parse_benefit_gradient("effective") == BenefitGradient::effective);
    CHECK_THROWS(parse_benefit_mode("absolute"));
}

TEST_CASE("inert gates reduce training to plain SGD") {
    const auto train_data = blobs(400, 1), test_data = blobs(200, 2);
    auto cfg = small_cfg();
    cfg.game.lr_s = 0.0;
    const auto result = train(small_net(3), train_data, test_data, cfg);
    for (double s : result.net.participation()) CHECK(s == 1.0);
    REQUIRE(result.metrics.size() == 5);
    CHECK(result.metrics.back().train_loss < result.metrics.front().train_loss);
    CHECK(result.metrics.back().test_accuracy > 0.9);
    CHECK(result.summary.pruned_players.empty());
    CHECK(result.summary.final_metrics.sparsity == 0.0);
}

TEST_CASE("training is deterministic") {
    const auto train_data = blobs(300, 1), test_data = blobs(100, 2);
    auto cfg = small_cfg();
    cfg.game.beta = 0.05;
    cfg.game.gamma = 0.05;
    cfg.game.lr_s = 0.01;
    const auto a = train(small_net(3), train_data, test_data, cfg);
    const auto b = train(small_net(3), train_data, test_data, cfg);
    CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
    CHECK(participation_csv(a.net) == participation_csv(b.net));
    cfg.seed = 6;
    const auto c = train(small_net(3), train_data, test_data, cfg);
    CHECK(participation_csv(a.net) != participation_csv(c.net));
}

TEST_CASE("metrics invariants hold every epoch") {
    const auto train_data = blobs(300, 1), test_data = blobs(100, 2);
    auto cfg = small_cfg();
    cfg.epochs = 8;
    cfg.game.gamma = 0.5;
    cfg.game.lr_s = 0.05;
    std::size_t hook_calls = 0;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochMetrics&) { ++hook_calls; };
    const auto r = train(small_net(4), train_data, test_data, cfg, hooks);
    CHECK(hook_calls == 8);
    for (const auto& m : r.metrics) {
        CHECK(m.sparsity + static_cast<double>(m.active_neurons) / 24.0 == doctest::Approx(1.0));
        CHECK(m.test_accuracy >= 0.0);
        CHECK(m.test_accuracy <= 1.0);
        CHECK(m.mean_participation >= 0.0);
        CHECK(m.mean_participation <= 1.0);
    }
    const auto s = r.net.participation();
    for (std::size_t id : r.summary.pruned_players) CHECK(s[id] == 0.0);
    std::size_t below = 0;
    for (double v : s) below += v < cfg.game.epsilon;
    CHECK(below == r.summary.pruned_players.size());
}

TEST_CASE("gate update cadence") {
    const auto train_data = blobs(320, 1), test_data = blobs(100, 2);
    auto cfg = small_cfg();
    cfg.epochs = 3;
    cfg.game.gamma = 0.1;
    cfg.game.lr_s = 0.01;
    cfg.s_update_every = 31;  // 30 batches in total: never reached
    for (double s : train(small_net(3), train_data, test_data, cfg).net.participation()) CHECK(s == 1.0);
    cfg.s_update_every = 10;  // once per epoch
    const auto r = train(small_net(3), train_data, test_data, cfg);
    std::size_t moved = 0;
    for (double s : r.net.participation()) moved += s != 1.0;
    CHECK(moved > 0);
}

TEST_CASE("divergence is recorded, not thrown") {
    const auto train_data = blobs(200, 1), test_data = blobs(50, 2);
    auto cfg = small_cfg();
    cfg.lr_theta = 1e6;
    const auto r = train(small_net(3), train_data, test_data, cfg);
    REQUIRE(r.summary.divergence.has_value());
    CHECK(r.summary.divergence->epoch >= 1);
    CHECK(!r.summary.divergence->message.empty());
}

TEST_CASE("player statistics") {
    Rng rng(8);
    const std::size_t sizes[] = {5, 4, 3, 2};
    auto net = ParticipatingNet::create(sizes, rng);
    for (auto& layer : net.hidden())
        for (double& b : layer.biases) b = rng_uniform(rng, -1, 1);
    DenseMatrix x(4, 5);
    for (double& v : x.data()) v = rng.next_unit();
    const std::uint8_t y[] = {0, 1, 1, 0};
    const auto grads = loss_and_backward(net, x, y).grads;

    TrainConfig cfg;
    auto st = collect_player_stats(net, grads, cfg);
    REQUIRE(st.size() == 7);
    CHECK(st.benefit == grads.benefit_raw);
    const auto& l1 = net.hidden()[1];
    CHECK(st.norm_sq[5] == doctest::Approx(row_dot(l1.weights, 1, l1.weights, 1) + l1.biases[1] * l1.biases[1]));
    for (double c : st.competition) CHECK(c == 0.0);

    cfg.benefit_mode = BenefitMode::absolute;
    cfg.benefit_gradient = BenefitGradient::effective;
    st = collect_player_stats(net, grads, cfg);
    for (std::size_t i = 0; i < 7; ++i) CHECK(st.benefit[i] == std::abs(grads.benefit_effective[i]));

    cfg.game.eta = 0.1;
    net.hidden()[0].participation = {1.0, 0.5, 0.0, 1.0};
    st = collect_player_stats(net, grads, cfg);
    const auto& l0 = net.hidden()[0];
    auto inner = [&](std::size_t i, std::size_t j) { return row_dot(l0.weights, i, l0.weights, j) + l0.biases[i] * l0.biases[j]; };
    CHECK(st.competition[0] == doctest::Approx(0.5 * inner(0, 1) + 1.0 * inner(0, 3)));
    CHECK(st.competition[2] == doctest::Approx(inner(2, 0) + 0.5 * inner(2, 1) + inner(2, 3)));
}

TEST_CASE("finalize_prune") {
    Rng rng(9);
    const std::size_t sizes[] = {3, 2, 2};
    auto net = ParticipatingNet::create(sizes, rng);
    net.hidden()[0].biases = {0.3, 0.4};
    net.hidden()[0].participation = {0.009, 0.011};
    const auto pruned = finalize_prune(net, 0.01);
    CHECK(pruned == std::vector<std::size_t>{0});
    CHECK(net.gate(0) == 0.0);
    CHECK(net.gate(1) == 0.011);
    for (double w : net.hidden()[0].weights.row(0)) CHECK(w == 0.0);
    CHECK(net.hidden()[0].biases[0] == 0.0);
    CHECK(net.hidden()[0].biases[1] == 0.4);

    auto untouched = ParticipatingNet::create(sizes, rng);
    const auto copy = untouched;
    CHECK(finalize_prune(untouched, 0.01).empty());
    CHECK(untouched.hidden()[0].weights == copy.hidden()[0].weights);
}

TEST_CASE("compute_sparsity") {
    const std::vector<double> ones(768, 1.0);
    const auto a = compute_sparsity(ones, 0.01);
    CHECK(a.sparsity == 0.0);
    CHECK(a.active == 768);
    std::vector<double> mostly(768, 0.0);
    for (std::size_t i = 0; i < 13; ++i) mostly[i] = 0.5;
    const auto b = compute_sparsity(mostly, 0.01);
    CHECK(b.active == 13);
    CHECK(b.sparsity == doctest::Approx(0.9831).epsilon(1e-4));
    const auto c = compute_sparsity(std::vector<double>{0, 0, 0.5, 1}, 0.01);
    CHECK(c.sparsity == 0.5);
    CHECK(c.active == 2);
}

TEST_CASE("participation_histogram") {
    const std::vector<double> ones(768, 1.0);
    const auto h = participation_histogram(ones, 10);
    CHECK(h.counts.back() == 768);
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() == 1.0);
    CHECK_THROWS(participation_histogram(ones, 1));

    Rng rng(10);
    std::vector<double> u(768);
    for (double& v : u) v = rng.next_unit();
    const auto q = participation_histogram(u, 4);
    const double expected = 192.0, sd = std::sqrt(768.0 * 0.25 * 0.75);
    std::size_t total = 0;
    for (auto c : q.counts) {
        CHECK(std::abs(static_cast<double>(c) - expected) < 3 * sd);
        total += c;
    }
    CHECK(total == 768);
    CHECK(participation_histogram(std::vector<double>{0.0, 0.5, 1.0}, 2).counts == std::vector<std::size_t>{1, 2});
}

TEST_CASE("middle_mass") {
    CHECK(middle_mass(std::vector<double>{0.0, 0.05, 0.5, 0.95, 1.0}) == doctest::Approx(0.2));
    CHECK(middle_mass(std::vector<double>{}) == 0.0);
}
