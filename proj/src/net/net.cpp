#include "eqprune/net.hpp"

#include "eqprune/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace eqprune {

ParticipatingNet::ParticipatingNet(std::vector<ParticipatingLayer> hidden, LinearLayer output)
    : hidden_(std::move(hidden)), output_(std::move(output)) {
    validate();
    for (std::size_t l = 0; l < hidden_.size(); ++l)
        for (std::size_t n = 0; n < hidden_[l].outputs(); ++n) players_.push_back({l, n});
}

void ParticipatingNet::validate() const {
    if (hidden_.empty()) throw std::invalid_argument("ParticipatingNet: needs at least one hidden layer");
    std::size_t fan_in = hidden_.front().inputs();
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& layer = hidden_[l];
        const std::string where = "hidden layer " + std::to_string(l);
        if (layer.inputs() != fan_in)
            throw std::invalid_argument(where + ": expects " + std::to_string(layer.inputs()) +
                                        " inputs, previous layer gives " + std::to_string(fan_in));
        if (layer.biases.size() != layer.outputs() || layer.participation.size() != layer.outputs())
            throw std::invalid_argument(where + ": bias/gate length does not match " +
                                        layer.weights.shape_string());
        for (double s : layer.participation)
            if (!(s >= 0.0 && s <= 1.0))
                throw std::invalid_argument(where + ": participation " + std::to_string(s) + " outside [0, 1]");
        fan_in = layer.outputs();
    }
    if (output_.weights.cols() != fan_in || output_.biases.size() != output_.weights.rows())
        throw std::invalid_argument("output layer: shape " + output_.weights.shape_string() +
                                    " does not follow " + std::to_string(fan_in) + " hidden units");
}

ParticipatingNet ParticipatingNet::create(std::span<const std::size_t> sizes, Rng& rng) {
    if (sizes.size() < 3) throw std::invalid_argument("ParticipatingNet::create: need inputs, hidden, classes");
    std::vector<ParticipatingLayer> hidden;
    for (std::size_t l = 1; l + 1 < sizes.size(); ++l) {
        hidden.push_back({he_init(rng, sizes[l], sizes[l - 1]), std::vector<double>(sizes[l], 0.0),
                          std::vector<double>(sizes[l], 1.0)});
    }
    const std::size_t classes = sizes.back();
    LinearLayer output{he_init(rng, classes, sizes[sizes.size() - 2]), std::vector<double>(classes, 0.0)};
    return {std::move(hidden), std::move(output)};
}

ParticipatingNet ParticipatingNet::mnist(Rng& rng) {
    constexpr std::array<std::size_t, 4> sizes{784, 512, 256, 10};
    return create(sizes, rng);
}

std::size_t ParticipatingNet::num_weights() const noexcept {
    std::size_t total = output_.weights.size() + output_.biases.size();
    for (const auto& layer : hidden_) total += layer.weights.size() + layer.biases.size();
    return total;
}

std::vector<double> ParticipatingNet::participation() const {
    std::vector<double> s;
    s.reserve(players_.size());
    for (const auto& layer : hidden_) s.insert(s.end(), layer.participation.begin(), layer.participation.end());
    return s;
}

void ParticipatingNet::set_participation(std::span<const double> s) {
    if (s.size() != players_.size())
        throw std::invalid_argument("set_participation: " + std::to_string(s.size()) + " values for " +
                                    std::to_string(players_.size()) + " players");
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!(s[i] >= 0.0 && s[i] <= 1.0))
            throw std::invalid_argument("set_participation: player " + std::to_string(i) + " gets " +
                                        std::to_string(s[i]));
    std::size_t i = 0;
    for (auto& layer : hidden_)
        for (double& v : layer.participation) v = s[i++];
}

double& ParticipatingNet::gate(std::size_t player) noexcept {
    const auto ref = players_[player];
    return hidden_[ref.layer].participation[ref.neuron];
}

double ParticipatingNet::gate(std::size_t player) const noexcept {
    const auto ref = players_[player];
    return hidden_[ref.layer].participation[ref.neuron];
}

namespace {

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& weights, std::span<const double> biases) {
    DenseMatrix z = matmul_transposed_b(x, weights);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] + biases[c];
    }
    return z;
}

void check_batch(const ParticipatingNet& net, const DenseMatrix& batch) {
    if (batch.cols() != net.input_size())
        throw std::invalid_argument("forward: batch is " + batch.shape_string() + ", network expects " +
                                    std::to_string(net.input_size()) + " inputs");
}

// Column sums accumulated row by row.
std::vector<double> column_sums(const DenseMatrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r), sums);
    return sums;
}

struct CrossEntropy {
    double loss;
    DenseMatrix dlogits;
};

CrossEntropy cross_entropy(const DenseMatrix& logits, std::span<const std::uint8_t> labels, bool with_grad) {
    if (labels.size() != logits.rows())
        throw std::invalid_argument("loss: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(logits.rows()) + " samples");
    const double inv_batch = 1.0 / static_cast<double>(logits.rows());
    CrossEntropy out{0.0, with_grad ? DenseMatrix(logits.rows(), logits.cols()) : DenseMatrix{}};
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto z = logits.row(r);
        if (labels[r] >= z.size())
            throw std::invalid_argument("loss: label " + std::to_string(labels[r]) + " with " +
                                        std::to_string(z.size()) + " classes");
        const double peak = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - peak);
        const double log_norm = peak + std::log(denom);
        total += log_norm - z[labels[r]];
        if (with_grad) {
            auto d = out.dlogits.row(r);
            for (std::size_t c = 0; c < z.size(); ++c) d[c] = std::exp(z[c] - log_norm) * inv_batch;
            d[labels[r]] -= inv_batch;
        }
    }
    out.loss = total * inv_batch;
    return out;
}

[[noreturn]] void report_non_finite(const ParticipatingNet& net, const DenseMatrix& logits, double value) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : logits.data()) peak = std::max(peak, std::abs(v));
    const auto s = net.participation();
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    std::ostringstream msg;
    msg << "non-finite loss " << value << " (max |logit| " << peak << ", participation range [" << *lo
        << ", " << *hi << "])";
    throw NonFiniteLoss(msg.str());
}

} // namespace

ForwardPass forward(const ParticipatingNet& net, const DenseMatrix& batch) {
    check_batch(net, batch);
    ForwardPass pass;
    const DenseMatrix* input = &batch;
    for (const auto& layer : net.hidden()) {
        pass.pre_gate.push_back(affine(*input, layer.weights, layer.biases));
        const DenseMatrix& u = pass.pre_gate.back();
        DenseMatrix h(u.rows(), u.cols());
        for (std::size_t r = 0; r < u.rows(); ++r) {
            const auto urow = u.row(r);
            auto hrow = h.row(r);
            for (std::size_t c = 0; c < urow.size(); ++c) {
                const double gated = layer.participation[c] * urow[c];
                hrow[c] = gated > 0.0 ? gated : 0.0;
            }
        }
        pass.activation.push_back(std::move(h));
        input = &pass.activation.back();
    }
    pass.logits = affine(*input, net.output().weights, net.output().biases);
    return pass;
}

double loss(const ParticipatingNet& net, const DenseMatrix& batch, std::span<const std::uint8_t> labels) {
    const auto pass = forward(net, batch);
    const double value = cross_entropy(pass.logits, labels, false).loss;
    if (!std::isfinite(value)) report_non_finite(net, pass.logits, value);
    return value;
}

LossAndGradients loss_and_backward(const ParticipatingNet& net, const DenseMatrix& batch,
                                   std::span<const std::uint8_t> labels) {
    const auto pass = forward(net, batch);
    auto ce = cross_entropy(pass.logits, labels, true);
    if (!std::isfinite(ce.loss)) report_non_finite(net, pass.logits, ce.loss);

    const auto& hidden = net.hidden();
    const std::size_t depth = hidden.size();
    GradientBundle grads;
    grads.hidden.resize(depth);
    grads.benefit_raw.assign(net.num_players(), 0.0);
    grads.benefit_effective.assign(net.num_players(), 0.0);

    grads.output.weights = matmul_transposed_a(ce.dlogits, pass.activation.back());
    grads.output.biases = column_sums(ce.dlogits);
    DenseMatrix upstream = matmul(ce.dlogits, net.output().weights);

    // First player id of every layer.
    std::vector<std::size_t> offset(depth, 0);
    for (std::size_t l = 1; l < depth; ++l) offset[l] = offset[l - 1] + hidden[l - 1].outputs();

    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = hidden[l];
        const DenseMatrix& u = pass.pre_gate[l];
        const DenseMatrix& input = l == 0 ? batch : pass.activation[l - 1];
        const auto& s = layer.participation;

        // upstream becomes dL/du in place; dL/ds accumulates alongside.
        std::vector<double> ds(layer.outputs(), 0.0);
        for (std::size_t r = 0; r < u.rows(); ++r) {
            const auto urow = u.row(r);
            auto drow = upstream.row(r);
            for (std::size_t c = 0; c < urow.size(); ++c) {
                const double da = s[c] * urow[c] > 0.0 ? drow[c] : 0.0;
                ds[c] = ds[c] + da * urow[c];
                drow[c] = da * s[c];
            }
        }

        LayerGradient& g = grads.hidden[l];
        g.weights = matmul_transposed_a(upstream, input);
        g.biases = column_sums(upstream);
        for (std::size_t n = 0; n < layer.outputs(); ++n) {
            grads.benefit_raw[offset[l] + n] = row_dot(g.weights, n, layer.weights, n) + g.biases[n] * layer.biases[n];
            grads.benefit_effective[offset[l] + n] = ds[n];
        }
        if (l > 0) upstream = matmul(upstream, layer.weights);
    }
    return {ce.loss, std::move(grads)};
}

double accuracy(const ParticipatingNet& net, const mnist::Dataset& data) {
    if (data.size() == 0) return 0.0;
    constexpr std::size_t chunk = 1000;
    std::size_t correct = 0;
    std::vector<std::size_t> indices;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t stop = std::min(data.size(), start + chunk);
        indices.resize(stop - start);
        for (std::size_t k = 0; k < indices.size(); ++k) indices[k] = start + k;
        const auto batch = mnist::gather(data, indices);
        const auto pass = forward(net, batch.images);
        for (std::size_t r = 0; r < pass.logits.rows(); ++r) {
            const auto z = pass.logits.row(r);
            const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
            if (best == batch.labels[r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace eqprune
