#include "eqprune/verify.hpp"

#include "eqprune/mnist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace eqprune::verify {

void GridSpec::validate() const {
    if (points < 101) throw std::invalid_argument("GridSpec: need at least 101 points");
    if (!(step > 1e-8 && step < 1e-3)) throw std::invalid_argument("GridSpec: step outside (1e-8, 1e-3)");
}

namespace {

// Utility written out independently of game::utility_at.
double naive_utility(double s, double g, double norm_sq, double competition, const game::GameConfig& cfg) {
    double value = cfg.alpha * g * s;
    value -= cfg.beta * norm_sq * s * s;
    value -= cfg.gamma * (s < 0.0 ? -s : s);
    value -= cfg.eta * competition * s;
    return value;
}

} // namespace

double grid_argmax_utility(std::size_t i, std::span<const double> s, const game::PlayerStats& stats,
                           const game::GameConfig& cfg, const GridSpec& grid) {
    grid.validate();
    if (i >= stats.benefit.size() || s.size() != stats.benefit.size())
        throw std::out_of_range("grid_argmax_utility: player index");
    double best_s = 0.0;
    double best_u = naive_utility(0.0, stats.benefit[i], stats.norm_sq[i], stats.competition[i], cfg);
    for (std::size_t k = 1; k < grid.points; ++k) {
        const double x = static_cast<double>(k) / static_cast<double>(grid.points - 1);
        const double u = naive_utility(x, stats.benefit[i], stats.norm_sq[i], stats.competition[i], cfg);
        if (u > best_u) {
            best_u = u;
            best_s = x;
        }
    }
    return best_s;
}

bool grid_dominance(std::size_t i, const game::PlayerStats& stats, const game::GameConfig& cfg,
                    std::size_t s_points, std::size_t competition_points, double c_min, double c_max) {
    const double at_zero = 0.0;
    for (std::size_t a = 1; a < s_points; ++a) {
        const double x = static_cast<double>(a) / static_cast<double>(s_points - 1);
        for (std::size_t b = 0; b < competition_points; ++b) {
            const double t = competition_points == 1 ? 0.0
                                                     : static_cast<double>(b) / static_cast<double>(competition_points - 1);
            const double c = b + 1 == competition_points ? c_max : c_min + (c_max - c_min) * t;
            if (!(at_zero > naive_utility(x, stats.benefit[i], stats.norm_sq[i], c, cfg))) return false;
        }
    }
    return true;
}

game::ParticipationState solve_decoupled_game(const game::PlayerStats& stats, const game::GameConfig& cfg) {
    if (cfg.eta != 0.0) throw std::invalid_argument("solve_decoupled_game: requires eta == 0");
    game::ParticipationState out;
    out.s.resize(stats.benefit.size());
    for (std::size_t i = 0; i < out.s.size(); ++i) {
        const double numerator = cfg.alpha * stats.benefit[i] - cfg.gamma;
        const double denominator = 2.0 * cfg.beta * stats.norm_sq[i];
        double v;
        if (numerator <= 0.0) v = 0.0;
        else if (denominator == 0.0) v = 1.0;
        else v = numerator / denominator;
        out.s[i] = v > 1.0 ? 1.0 : v;
    }
    return out;
}

DenseMatrix reference_logits(const ParticipatingNet& net, const DenseMatrix& batch) {
    DenseMatrix current = batch;
    for (const auto& layer : net.hidden()) {
        DenseMatrix next(current.rows(), layer.outputs());
        for (std::size_t r = 0; r < current.rows(); ++r) {
            for (std::size_t o = 0; o < layer.outputs(); ++o) {
                double z = layer.biases[o];
                for (std::size_t k = 0; k < layer.inputs(); ++k) z += layer.weights(o, k) * current(r, k);
                const double a = layer.participation[o] * z;
                next(r, o) = a > 0.0 ? a : 0.0;
            }
        }
        current = std::move(next);
    }
    const auto& out = net.output();
    DenseMatrix logits(current.rows(), out.weights.rows());
    for (std::size_t r = 0; r < current.rows(); ++r)
        for (std::size_t o = 0; o < out.weights.rows(); ++o) {
            double z = out.biases[o];
            for (std::size_t k = 0; k < out.weights.cols(); ++k) z += out.weights(o, k) * current(r, k);
            logits(r, o) = z;
        }
    return logits;
}

double reference_loss(const ParticipatingNet& net, const DenseMatrix& batch, std::span<const std::uint8_t> labels) {
    const DenseMatrix logits = reference_logits(net, batch);
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double peak = logits(r, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c) peak = std::max(peak, logits(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - peak);
        total += peak + std::log(sum) - logits(r, labels[r]);
    }
    return total / static_cast<double>(logits.rows());
}

namespace {

template <class Setter>
double central_difference(ParticipatingNet& net, const DenseMatrix& batch, std::span<const std::uint8_t> labels,
                          double step, Setter&& set) {
    set(step);
    const double up = reference_loss(net, batch, labels);
    set(-step);
    const double down = reference_loss(net, batch, labels);
    set(0.0);
    return (up - down) / (2.0 * step);
}

} // namespace

GradientBundle finite_diff_loss_grad(const ParticipatingNet& net, const DenseMatrix& batch,
                                     std::span<const std::uint8_t> labels, double step) {
    ParticipatingNet probe = net;
    GradientBundle g;
    auto diff_matrix = [&](DenseMatrix& target, DenseMatrix& out) {
        out = DenseMatrix(target.rows(), target.cols());
        for (std::size_t r = 0; r < target.rows(); ++r)
            for (std::size_t c = 0; c < target.cols(); ++c) {
                const double base = target(r, c);
                out(r, c) = central_difference(probe, batch, labels, step, [&](double d) { target(r, c) = base + d; });
            }
    };
    auto diff_vector = [&](std::vector<double>& target, std::vector<double>& out) {
        out.assign(target.size(), 0.0);
        for (std::size_t k = 0; k < target.size(); ++k) {
            const double base = target[k];
            out[k] = central_difference(probe, batch, labels, step, [&](double d) { target[k] = base + d; });
        }
    };

    g.hidden.resize(net.hidden().size());
    for (std::size_t l = 0; l < net.hidden().size(); ++l) {
        diff_matrix(probe.hidden()[l].weights, g.hidden[l].weights);
        diff_vector(probe.hidden()[l].biases, g.hidden[l].biases);
    }
    diff_matrix(probe.output().weights, g.output.weights);
    diff_vector(probe.output().biases, g.output.biases);

    for (std::size_t l = 0; l < net.hidden().size(); ++l) {
        auto& layer = probe.hidden()[l];
        for (std::size_t n = 0; n < layer.outputs(); ++n) {
            // d/dc L(c * theta_n) at c = 1
            const std::vector<double> row(layer.weights.row(n).begin(), layer.weights.row(n).end());
            const double bias = layer.biases[n];
            g.benefit_raw.push_back(central_difference(probe, batch, labels, step, [&](double d) {
                for (std::size_t k = 0; k < row.size(); ++k) layer.weights(n, k) = (1.0 + d) * row[k];
                layer.biases[n] = (1.0 + d) * bias;
            }));
            const double gate = layer.participation[n];
            g.benefit_effective.push_back(central_difference(probe, batch, labels, step, [&](double d) {
                layer.participation[n] = gate + d;
            }));
        }
    }
    return g;
}

double relative_error(double a, double b, double floor) {
    const double scale = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / scale;
}

GradientComparison compare_gradients(const GradientBundle& analytic, const GradientBundle& numeric, double floor) {
    GradientComparison out;
    auto consider = [&](double a, double n, const std::string& label) {
        const double e = relative_error(a, n, floor);
        if (e > out.max_relative_error || out.worst_entry.empty()) {
            if (e >= out.max_relative_error) {
                out.max_relative_error = e;
                out.worst_entry = label;
            }
        }
    };
    auto matrices = [&](const DenseMatrix& a, const DenseMatrix& n, const std::string& name) {
        if (a.rows() != n.rows() || a.cols() != n.cols()) throw std::invalid_argument(name + ": shape mismatch");
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c)
                consider(a(r, c), n(r, c), name + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
    };
    auto vectors = [&](const std::vector<double>& a, const std::vector<double>& n, const std::string& name) {
        if (a.size() != n.size()) throw std::invalid_argument(name + ": length mismatch");
        for (std::size_t k = 0; k < a.size(); ++k) consider(a[k], n[k], name + "[" + std::to_string(k) + "]");
    };
    for (std::size_t l = 0; l < analytic.hidden.size(); ++l) {
        const std::string prefix = "hidden[" + std::to_string(l) + "].";
        matrices(analytic.hidden[l].weights, numeric.hidden[l].weights, prefix + "weights");
        vectors(analytic.hidden[l].biases, numeric.hidden[l].biases, prefix + "biases");
    }
    matrices(analytic.output.weights, numeric.output.weights, "output.weights");
    vectors(analytic.output.biases, numeric.output.biases, "output.biases");
    vectors(analytic.benefit_raw, numeric.benefit_raw, "benefit_raw");
    vectors(analytic.benefit_effective, numeric.benefit_effective, "benefit_effective");
    return out;
}

// --- suites -------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ToyInstance {
    ParticipatingNet net;
    DenseMatrix batch;
    std::vector<std::uint8_t> labels;
};

// Random toy net whose gated pre-activations all stay clear of the ReLU kink.
ToyInstance toy_instance(std::span<const std::size_t> sizes, std::size_t batch_rows, Rng& rng) {
    for (;;) {
        ParticipatingNet net = ParticipatingNet::create(sizes, rng);
        for (auto& layer : net.hidden()) {
            for (double& b : layer.biases) b = rng_uniform(rng, -0.5, 0.5);
            for (double& s : layer.participation) s = rng_uniform(rng, 0.3, 1.0);
            layer.participation.front() = 1.0;
        }
        for (double& b : net.output().biases) b = rng_uniform(rng, -0.5, 0.5);
        DenseMatrix batch(batch_rows, sizes.front());
        for (double& v : batch.data()) v = rng_uniform(rng, -1.0, 1.0);
        std::vector<std::uint8_t> labels(batch_rows);
        for (auto& y : labels) y = static_cast<std::uint8_t>(rng.next_below(sizes.back()));

        bool clear = true;
        DenseMatrix current = batch;
        for (const auto& layer : net.hidden()) {
            DenseMatrix next(current.rows(), layer.outputs());
            for (std::size_t r = 0; r < current.rows(); ++r)
                for (std::size_t o = 0; o < layer.outputs(); ++o) {
                    double z = layer.biases[o];
                    for (std::size_t k = 0; k < layer.inputs(); ++k) z += layer.weights(o, k) * current(r, k);
                    const double a = layer.participation[o] * z;
                    if (std::abs(a) < 1e-3) clear = false;
                    next(r, o) = a > 0.0 ? a : 0.0;
                }
            current = std::move(next);
        }
        if (clear) return {std::move(net), std::move(batch), std::move(labels)};
    }
}

struct Regime {
    const char* name;
    double beta;
    double gamma;
};

constexpr std::array<Regime, 4> kRegimes{{
    {"very_high_beta", 0.1, 0.0},
    {"extreme_beta", 0.5, 0.0},
    {"l1_sparsity_strong", 0.001, 0.1},
    {"l1_l2_combined", 0.05, 0.05},
}};

// One random player: benefit across several magnitudes and both signs,
// norm mostly positive with occasional dead neurons.
game::PlayerTerms random_terms(Rng& rng, bool with_competition) {
    game::PlayerTerms t;
    t.benefit = rng_uniform(rng, -1.0, 1.0) * std::pow(10.0, rng_uniform(rng, -3.0, 0.5));
    t.norm_sq = rng.next_unit() < 0.05 ? 0.0 : std::pow(10.0, rng_uniform(rng, -2.0, 1.0));
    t.competition = with_competition ? rng_uniform(rng, -1.0, 2.0) : 0.0;
    return t;
}

game::PlayerStats single_player(const game::PlayerTerms& t) {
    return {{t.benefit}, {t.norm_sq}, {t.competition}};
}

std::string describe(const game::PlayerTerms& t, const game::GameConfig& cfg) {
    return "g=" + fmt(t.benefit) + " norm_sq=" + fmt(t.norm_sq) + " competition=" + fmt(t.competition) +
           " alpha=" + fmt(cfg.alpha) + " beta=" + fmt(cfg.beta) + " gamma=" + fmt(cfg.gamma) + " eta=" + fmt(cfg.eta);
}

} // namespace

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
    std::vector<CheckResult> out;
    Rng rng(seed);
    const std::vector<std::vector<std::size_t>> shapes{{6, 4, 3}, {6, 5, 4, 3}};
    for (const auto& shape : shapes) {
        std::string label = "gradient check ";
        for (std::size_t k = 0; k < shape.size(); ++k) label += (k ? "-" : "") + std::to_string(shape[k]);
        const auto inst = toy_instance(shape, 5, rng);
        const auto analytic = loss_and_backward(inst.net, inst.batch, inst.labels).grads;
        const auto numeric = finite_diff_loss_grad(inst.net, inst.batch, inst.labels, 1e-5);
        const auto cmp = compare_gradients(analytic, numeric);
        CheckResult r{label, cmp.max_relative_error < 1e-5,
                      "max relative error " + fmt(cmp.max_relative_error) + " at " + cmp.worst_entry};
        if (!r.passed) r.detail += " (seed " + std::to_string(seed) + ")";
        out.push_back(std::move(r));
    }

    // Closed gates erase their neuron's incoming weights.
    {
        const std::size_t shape[] = {6, 4, 3};
        auto inst = toy_instance(shape, 5, rng);
        inst.net.hidden()[0].participation[1] = 0.0;
        const auto before = forward(inst.net, inst.batch).logits;
        for (double& w : inst.net.hidden()[0].weights.row(1)) w = rng_uniform(rng, -10.0, 10.0);
        inst.net.hidden()[0].biases[1] = rng_uniform(rng, -10.0, 10.0);
        const auto after = forward(inst.net, inst.batch).logits;
        double worst = 0.0;
        for (std::size_t k = 0; k < before.size(); ++k) worst = std::max(worst, std::abs(before.data()[k] - after.data()[k]));
        const auto grads = loss_and_backward(inst.net, inst.batch, inst.labels).grads;
        out.push_back({"closed gate erasure", worst < 1e-12 && grads.benefit_raw[1] == 0.0,
                       "max logit change " + fmt(worst) + ", benefit " + fmt(grads.benefit_raw[1])});
    }

    // Forward pass agrees with the naive loops.
    {
        const std::size_t shape[] = {6, 5, 4, 3};
        const auto inst = toy_instance(shape, 7, rng);
        const auto fast = forward(inst.net, inst.batch).logits;
        const auto slow = reference_logits(inst.net, inst.batch);
        double worst = 0.0;
        for (std::size_t k = 0; k < fast.size(); ++k) worst = std::max(worst, std::abs(fast.data()[k] - slow.data()[k]));
        out.push_back({"forward vs reference loops", worst < 1e-12, "max |delta| " + fmt(worst)});
    }
    return out;
}

std::vector<CheckResult> game_suite(std::uint64_t seed) {
    std::vector<CheckResult> out;
    Rng rng(seed);
    const GridSpec grid{10001, 1e-6};
    const double spacing = 1.0 / static_cast<double>(grid.points - 1);

    {
        double worst = 0.0;
        std::string failure;
        std::size_t prune_checked = 0;
        std::string prune_failure;
        for (std::size_t n = 0; n < 1000; ++n) {
            const auto& regime = kRegimes[n % kRegimes.size()];
            game::GameConfig cfg;
            cfg.beta = regime.beta;
            cfg.gamma = regime.gamma;
            const auto t = random_terms(rng, false);
            const auto stats = single_player(t);
            const std::vector<double> s{rng.next_unit()};
            const double closed = game::best_response(0, s, stats, cfg);
            const double searched = grid_argmax_utility(0, s, stats, cfg, grid);
            const double gap = std::abs(closed - searched);
            if (gap > worst) worst = gap;
            if (gap > 2e-4 && failure.empty())
                failure = std::string(regime.name) + ": " + describe(t, cfg) + " closed=" + fmt(closed) + " grid=" + fmt(searched);
            if (cfg.beta * t.norm_sq > 0.0) {
                ++prune_checked;
                if (game::is_pruned_at_equilibrium(0, s, stats, cfg) != (closed == 0.0) && prune_failure.empty())
                    prune_failure = describe(t, cfg);
            }
        }
        out.push_back({"best response vs grid argmax (1000 instances)", failure.empty(),
                       failure.empty() ? "max gap " + fmt(worst) + " (spacing " + fmt(spacing) + ")" : failure});
        out.push_back({"pruning condition vs best response == 0", prune_failure.empty(),
                       prune_failure.empty() ? std::to_string(prune_checked) + " instances agree" : prune_failure});
    }

    {
        double worst = 0.0;
        std::string failure;
        for (std::size_t n = 0; n < 500; ++n) {
            game::GameConfig cfg;
            cfg.beta = rng_uniform(rng, 0.0, 0.5);
            cfg.gamma = rng_uniform(rng, 0.0, 0.2);
            cfg.eta = rng_uniform(rng, 0.0, 0.3);
            const auto t = random_terms(rng, true);
            const auto stats = single_player(t);
            const double x = rng_uniform(rng, 0.01, 0.99);
            const double h = 1e-6;
            const std::vector<double> s{x};
            const double fd = (naive_utility(x + h, t.benefit, t.norm_sq, t.competition, cfg) -
                               naive_utility(x - h, t.benefit, t.norm_sq, t.competition, cfg)) / (2.0 * h);
            const double gap = std::abs(game::utility_gradient(0, s, stats, cfg) - fd);
            worst = std::max(worst, gap);
            if (gap >= 1e-8 && failure.empty()) failure = describe(t, cfg) + " s=" + fmt(x);
        }
        out.push_back({"utility gradient vs finite differences", failure.empty(),
                       failure.empty() ? "max |delta| " + fmt(worst) : failure});
    }

    {
        std::string failure;
        for (std::size_t n = 0; n < 100 && failure.empty(); ++n) {
            const auto& regime = kRegimes[n % kRegimes.size()];
            game::GameConfig cfg;
            cfg.beta = regime.beta;
            cfg.gamma = regime.gamma;
            const std::size_t players = 1 + rng.next_below(64);
            game::PlayerStats stats;
            for (std::size_t i = 0; i < players; ++i) {
                const auto t = random_terms(rng, false);
                stats.benefit.push_back(t.benefit);
                stats.norm_sq.push_back(t.norm_sq);
                stats.competition.push_back(0.0);
            }
            const auto exact = solve_decoupled_game(stats, cfg);
            game::ParticipationState state{std::vector<double>(players, 1.0)};
            std::size_t iterations = 0;
            while (game::equilibrium_residual(state, stats, cfg) >= 1e-9 && iterations < 2) {
                state = game::best_response_step(state, stats, cfg);
                ++iterations;
            }
            const double residual = game::equilibrium_residual(state, stats, cfg);
            if (residual >= 1e-9 || state.s != exact.s)
                failure = std::string(regime.name) + " instance " + std::to_string(n) + ": residual " + fmt(residual) +
                          " after " + std::to_string(iterations) + " iterations (seed " + std::to_string(seed) + ")";
        }
        out.push_back({"decoupled best-response convergence (100 games)", failure.empty(),
                       failure.empty() ? "all converged within 2 iterations" : failure});
    }

    {
        std::string failure;
        std::size_t dominated = 0;
        for (std::size_t n = 0; n < 100 && failure.empty(); ++n) {
            game::GameConfig cfg;
            cfg.beta = rng_uniform(rng, 0.0, 0.5);
            cfg.gamma = rng_uniform(rng, 0.0, 0.2);
            cfg.eta = rng_uniform(rng, 0.0, 0.3);
            auto t = random_terms(rng, false);
            const double c_min = rng_uniform(rng, -1.0, 1.0);
            const double c_max = c_min + rng_uniform(rng, 0.0, 1.0);
            const auto stats = single_player(t);
            const bool fast = game::dominance_check(0, stats, cfg, 101, {c_min, c_max});
            const bool slow = grid_dominance(0, stats, cfg, 101, 101, c_min, c_max);
            dominated += fast ? 1 : 0;
            if (fast != slow)
                failure = describe(t, cfg) + " c_range=[" + fmt(c_min) + ", " + fmt(c_max) + "]";
        }
        out.push_back({"dominance check vs 2-D grid enumeration", failure.empty(),
                       failure.empty() ? std::to_string(dominated) + "/100 dominated, all agree" : failure});
    }
    return out;
}

std::vector<CheckResult> data_suite() {
    std::vector<CheckResult> out;
    const std::vector<std::uint8_t> image_fixture{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                                                  0, 255, 128, 0, 1, 2, 3, 4};
    const std::vector<std::uint8_t> label_fixture{0, 0, 8, 1, 0, 0, 0, 3, 3, 1, 4};

    try {
        const auto images = mnist::parse_idx_images(image_fixture);
        const bool ok = images.rows() == 2 && images.cols() == 4 && images(0, 0) == 0.0 && images(0, 1) == 1.0 &&
                        images(0, 2) == 128.0 / 255.0 && images(0, 3) == 0.0 && images(1, 3) == 4.0 / 255.0;
        out.push_back({"IDX3 fixture decode", ok, "2 images of 2x2"});
        const auto encoded = mnist::encode_idx_images(images, 2, 2);
        out.push_back({"IDX3 fixture round trip", encoded == image_fixture, std::to_string(encoded.size()) + " bytes"});
    } catch (const std::exception& e) {
        out.push_back({"IDX3 fixture decode", false, e.what()});
    }

    try {
        const auto labels = mnist::parse_idx_labels(label_fixture);
        out.push_back({"IDX1 fixture decode", labels == std::vector<std::uint8_t>{3, 1, 4}, "labels 3,1,4"});
        out.push_back({"IDX1 fixture round trip", mnist::encode_idx_labels(labels) == label_fixture, ""});
    } catch (const std::exception& e) {
        out.push_back({"IDX1 fixture decode", false, e.what()});
    }

    auto expect_error = [&](const std::string& name, auto&& fn) {
        try {
            fn();
            out.push_back({name, false, "accepted malformed input"});
        } catch (const mnist::IdxError& e) {
            out.push_back({name, true, e.what()});
        }
    };
    expect_error("rejects wrong magic", [&] {
        auto bad = image_fixture;
        bad[3] = 1;
        mnist::parse_idx_images(bad);
    });
    expect_error("rejects truncated payload", [&] {
        auto bad = image_fixture;
        bad.pop_back();
        mnist::parse_idx_images(bad);
    });
    expect_error("rejects label outside 0..9", [&] {
        auto bad = label_fixture;
        bad.back() = 10;
        mnist::parse_idx_labels(bad);
    });

    try {
        const auto dir = std::filesystem::temp_directory_path() / "eqprune_verify_data";
        std::filesystem::create_directories(dir);
        const auto gz = dir / "fixture-images.gz";
        mnist::write_file_bytes(gz, image_fixture);
        const auto back = mnist::encode_idx_images(mnist::load_idx_images(gz), 2, 2);
        std::filesystem::remove_all(dir);
        out.push_back({"gzip fixture round trip", back == image_fixture, ""});
    } catch (const std::exception& e) {
        out.push_back({"gzip fixture round trip", false, e.what()});
    }
    return out;
}

} // namespace eqprune::verify
