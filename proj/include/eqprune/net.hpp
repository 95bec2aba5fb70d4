#pragma once

// Participation-gated multilayer perceptron.
//
// Each hidden neuron i owns a gate s_i in [0, 1] that multiplies its
// pre-activation:  h_i = ReLU(s_i * (w_i . x + b_i)).  The neuron's incoming
// weight row and bias form its parameter group theta_i; the output layer is
// an ordinary affine map without gates. Players are numbered layer by layer.

#include "eqprune/mnist.hpp"
#include "eqprune/numkit.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace eqprune {

struct ParticipatingLayer {
    DenseMatrix weights;                // outputs x inputs
    std::vector<double> biases;         // outputs
    std::vector<double> participation;  // outputs, each in [0, 1]

    std::size_t inputs() const noexcept { return weights.cols(); }
    std::size_t outputs() const noexcept { return weights.rows(); }
};

struct LinearLayer {
    DenseMatrix weights;          // outputs x inputs
    std::vector<double> biases;   // outputs
};

struct PlayerRef {
    std::size_t layer;
    std::size_t neuron;
    friend bool operator==(const PlayerRef&, const PlayerRef&) = default;
};

class ParticipatingNet {
public:
    ParticipatingNet(std::vector<ParticipatingLayer> hidden, LinearLayer output);

    /// He-initialized weights, zero biases, all gates open.
    /// `sizes` = {inputs, hidden..., classes}; at least one hidden layer.
    static ParticipatingNet create(std::span<const std::size_t> sizes, Rng& rng);

    /// The 784-512-256-10 network.
    static ParticipatingNet mnist(Rng& rng);

    std::size_t input_size() const noexcept { return hidden_.front().inputs(); }
    std::size_t num_classes() const noexcept { return output_.weights.rows(); }
    std::size_t num_players() const noexcept { return players_.size(); }
    /// Weights plus biases of every layer; gates are not counted.
    std::size_t num_weights() const noexcept;
    /// num_weights() plus one gate per player.
    std::size_t num_parameters() const noexcept { return num_weights() + num_players(); }

    const std::vector<ParticipatingLayer>& hidden() const noexcept { return hidden_; }
    std::vector<ParticipatingLayer>& hidden() noexcept { return hidden_; }
    const LinearLayer& output() const noexcept { return output_; }
    LinearLayer& output() noexcept { return output_; }

    const std::vector<PlayerRef>& players() const noexcept { return players_; }

    /// All gates concatenated in player order.
    std::vector<double> participation() const;
    /// Throws if the length differs or any value leaves [0, 1].
    void set_participation(std::span<const double> s);

    double& gate(std::size_t player) noexcept;
    double gate(std::size_t player) const noexcept;

private:
    void validate() const;

    std::vector<ParticipatingLayer> hidden_;
    LinearLayer output_;
    std::vector<PlayerRef> players_;
};

struct ForwardPass {
    std::vector<DenseMatrix> pre_gate;    // per hidden layer: X W^T + b
    std::vector<DenseMatrix> activation;  // per hidden layer: ReLU(s * pre_gate)
    DenseMatrix logits;
};

ForwardPass forward(const ParticipatingNet& net, const DenseMatrix& batch);

struct LayerGradient {
    DenseMatrix weights;
    std::vector<double> biases;
};

struct GradientBundle {
    std::vector<LayerGradient> hidden;
    LayerGradient output;
    /// <dL/d theta_i, theta_i> over the raw group parameters (row and bias).
    /// Carries the factor s_i, so it vanishes on closed gates.
    std::vector<double> benefit_raw;
    /// dL/ds_i, equivalently <dL/d(s_i theta_i), theta_i>.
    std::vector<double> benefit_effective;
};

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LossAndGradients {
    double loss;  // mean cross-entropy
    GradientBundle grads;
};

/// Mean cross-entropy of the batch.
double loss(const ParticipatingNet& net, const DenseMatrix& batch, std::span<const std::uint8_t> labels);

LossAndGradients loss_and_backward(const ParticipatingNet& net, const DenseMatrix& batch,
                                   std::span<const std::uint8_t> labels);

/// Fraction of argmax predictions matching the labels.
double accuracy(const ParticipatingNet& net, const mnist::Dataset& data);

} // namespace eqprune
