#pragma once

// Residual fully-connected network
//
//   h_0     = tanh(W_in x + b_in)                 input map, n0 -> n
//   h_k     = h_{k-1} + sigma(W_k h_{k-1} + b_k)  residual layers k = 1..R
//   z       = W_out h_R + b_out                   output map, n -> nT
//
// with the admissible sigma of activation.hpp. Interfaces are numbered
// l = 1..R+1; interface l is the hidden state h_{l-1}, i.e. the output of
// the l-th hidden layer when the input map counts as hidden layer 1. A layer
// inserted at interface l reads h_{l-1} and feeds the layer that used to.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "grownet/activation.hpp"
#include "grownet/data.hpp"
#include "grownet/linalg.hpp"

namespace grownet {

enum class LossKind { MeanSquared, CrossEntropy };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view name);

/// Phi(z; c) for one sample.
double sample_loss(LossKind kind, std::span<const double> z, std::span<const double> c);
/// grad_z Phi(z; c) written into `grad`.
void sample_loss_gradient(LossKind kind, std::span<const double> z, std::span<const double> c,
                          std::span<double> grad);

struct NetworkSpec {
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t width = 1;
    std::size_t hidden_count = 0;  // residual layers
    ActivationSpec activation = make_admissible("swish+tanh");
    PlainActivation input_activation = PlainActivation::Tanh;
    double input_sparsity = 0.0;  // fraction of frozen-zero input weights
    LossKind loss = LossKind::MeanSquared;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct DenseLayer {
    Matrix weight;  // out x in; row r holds the weights of output neuron r
    std::vector<double> bias;
    bool frozen = false;

    DenseLayer() = default;
    DenseLayer(std::size_t out, std::size_t in) : weight(out, in), bias(out, 0.0) {}
    std::size_t param_count() const noexcept { return weight.size() + bias.size(); }
};

/// A layer-shaped bundle of values: used both for the parameters of a
/// Network and for the gradient of the loss with respect to them.
struct Parameters {
    DenseLayer input;
    std::vector<DenseLayer> hidden;
    DenseLayer output;

    std::size_t count() const noexcept;
    /// input W, input b, hidden W/b in order, output W, output b.
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
};

class Network {
public:
    /// All-zero parameters.
    explicit Network(NetworkSpec spec);
    /// Gaussian N(0, init_std^2) weights and biases; `input_sparsity` of the
    /// input weights are chosen at random and pinned to zero.
    Network(NetworkSpec spec, Rng& rng, double init_std = 0.01);

    const NetworkSpec& spec() const noexcept { return spec_; }
    const Parameters& params() const noexcept { return params_; }
    Parameters& params() noexcept { return params_; }

    const DenseLayer& input_layer() const noexcept { return params_.input; }
    const std::vector<DenseLayer>& hidden_layers() const noexcept { return params_.hidden; }
    const DenseLayer& output_layer() const noexcept { return params_.output; }
    DenseLayer& hidden_layer(std::size_t k) { return params_.hidden.at(k); }

    /// 1 where an input weight is structurally removed (kept at exactly 0).
    const std::vector<unsigned char>& input_mask() const noexcept { return input_mask_; }
    void set_input_mask(std::vector<unsigned char> mask);

    std::size_t param_count() const noexcept { return params_.count(); }
    std::size_t interface_count() const noexcept { return params_.hidden.size() + 1; }

    std::vector<double> parameters() const { return params_.flatten(); }
    void set_parameters(std::span<const double> flat);
    /// 1 for entries an optimizer may update (not masked, layer not frozen).
    std::vector<unsigned char> trainable_mask() const;

    /// Marks every current layer except the output map as frozen.
    void freeze_hidden();
    void unfreeze_all();

    /// Inserts `layer` so that it reads interface l.
    void insert_hidden(std::size_t interface, DenseLayer layer);

private:
    NetworkSpec spec_;
    Parameters params_;
    std::vector<unsigned char> input_mask_;
};

/// Raised when forward propagation leaves the finite range; `layer` counts
/// the input map as 0, residual layers 1..R and the output map R+1.
class LayerNumericError : public NumericError {
public:
    LayerNumericError(const std::string& what, std::size_t layer)
        : NumericError(what + " at layer " + std::to_string(layer)), layer_(layer) {}
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

/// States and adjoints of one sweep over a batch. Row s of every matrix
/// belongs to sample s.
struct Trace {
    Matrix inputs;
    Matrix labels;
    Matrix input_preact;          // W_in x + b_in
    std::vector<Matrix> states;   // h_0..h_R
    std::vector<Matrix> preacts;  // W_k h_{k-1} + b_k, k = 1..R
    Matrix output;                // z
    double loss = 0.0;

    bool has_adjoints = false;
    std::vector<Matrix> adjoints;  // p at h_0..h_R
    Matrix output_adjoint;         // p_T = -(1/S) grad Phi(z)
    Parameters grads;              // grad_theta J

    std::size_t samples() const noexcept { return inputs.rows(); }
    const Matrix& state_at(std::size_t interface) const { return states.at(interface - 1); }
    const Matrix& adjoint_at(std::size_t interface) const { return adjoints.at(interface - 1); }
};

/// Forward sweep; J = (1/S) sum_s Phi(z_s).
/// Throws std::invalid_argument on shape mismatch and LayerNumericError on
/// non-finite intermediates.
Trace forward(const Network& net, const Dataset& batch);

/// Loss only, without keeping intermediate states.
double evaluate_loss(const Network& net, const Dataset& batch);

/// Backward sweep filling adjoints and grad_theta J (descent convention:
/// theta <- theta - lr * grads lowers J). Frozen layers and masked input
/// weights get exactly zero gradient.
void adjoint(const Network& net, Trace& trace);

/// forward + adjoint, returning the flattened gradient.
std::vector<double> loss_gradient(const Network& net, const Dataset& batch, double* loss = nullptr);

/// Network with an extra residual layer reading interface l, W = eps *
/// reshape(direction) (row r = direction[r*n .. r*n+n)), b = 0.
/// Throws std::invalid_argument when l is outside 1..R+1, the direction has
/// the wrong length, or eps > 0 and |direction| differs from 1 by > 1e-10.
Network insert_layer(const Network& net, std::size_t interface, std::span<const double> direction,
                     double eps);

/// sum_s p_{s,l} . (x_{s,l} + sigma(Theta x_{s,l})) for a probe weight
/// matrix Theta = reshape(theta_probe) of a layer inserted at interface l.
double hamiltonian_at(const Network& net, const Trace& trace, std::size_t interface,
                      std::span<const double> theta_probe);

/// Versioned text dump; doubles are written as hex floats, so a round trip
/// is bit-exact.
void save_checkpoint(const Network& net, std::ostream& out);
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(std::istream& in);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace grownet
