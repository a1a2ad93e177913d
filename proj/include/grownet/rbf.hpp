#pragma once

// Scalar residual chain of modified radial basis functions:
//
//   x_{k} = x_{k-1} + a * (exp(-(w x_{k-1} + s - c)^2 / 2) - exp(-c^2 / 2))
//
// with per-layer parameters (w, s, a) and a shared nonzero center c. The
// subtracted constant makes g(x; 0) = 0 and both first derivatives vanish at
// zero parameters, so a zero layer can be inserted anywhere. The chain has
// no input or output map; interfaces are the states x_0..x_L, numbered
// 0..L, and a layer inserted at interface l reads x_l.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "grownet/data.hpp"
#include "grownet/linalg.hpp"
#include "grownet/topo.hpp"

namespace grownet {

struct RbfLayer {
    double scale = 0.0;      // theta^(1)
    double shift = 0.0;      // theta^(2)
    double amplitude = 0.0;  // theta^(3)
    bool frozen = false;

    std::array<double, 3> values() const { return {scale, shift, amplitude}; }
};

struct RbfChain {
    std::vector<RbfLayer> layers;
    double center = 0.1;

    /// Throws std::invalid_argument when center == 0.
    void validate() const;
    std::size_t interface_count() const noexcept { return layers.size() + 1; }
    std::size_t param_count() const noexcept { return 3 * layers.size(); }

    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    std::vector<unsigned char> trainable_mask() const;

    /// g(x) of one layer.
    double layer_map(const RbfLayer& l, double x) const;
};

struct RbfTrace {
    std::vector<std::vector<double>> states;    // [k][s], k = 0..L
    std::vector<std::vector<double>> adjoints;  // [k][s], p = -dJ/dx
    std::vector<double> grads;                  // dJ/dtheta, 3 per layer
    double loss = 0.0;

    std::size_t samples() const noexcept { return states.empty() ? 0 : states.front().size(); }
};

/// MSE loss J = (1/S) sum 1/2 (x_L - y)^2 with states, adjoints and
/// gradients. Inputs and labels must both be one column.
RbfTrace rbf_forward_adjoint(const RbfChain& chain, const Dataset& data);
double rbf_loss(const RbfChain& chain, const Dataset& data);

/// 1/2 sum_s [[0,0,c1 p x],[0,0,c1 p],[c1 p x, c1 p, 0]] at interface l with
/// c1 = c exp(-c^2/2).
Matrix rbf_block(const RbfTrace& trace, std::size_t interface, double center);

/// Chain with an extra layer reading interface l, parameters eps * direction.
RbfChain rbf_insert(const RbfChain& chain, std::size_t interface, std::span<const double> direction,
                    double eps);

/// One 3x3 block per interface, m = 1.
TopoReport rbf_scan(const RbfChain& chain, const Dataset& data);

/// Central-difference Hessian of J with respect to (w, s, a) of a zero layer
/// inserted at `interface`.
Matrix rbf_finite_difference_hessian(const RbfChain& chain, const Dataset& data, std::size_t interface,
                                     double step = 1e-3);

struct RbfProblem {
    RbfChain truth;
    DataSplits splits;
};

/// Truth chain of `depth` layers with parameters ~ N(0, 3 I), center 0.1;
/// x uniform on [-2, 2] and labels from the truth chain.
RbfProblem gen_rbf_dataset(std::uint64_t seed, std::size_t train = 5000, std::size_t validation = 500,
                           std::size_t test = 1000, std::size_t depth = 15, double center = 0.1);

/// Labels computed by running `chain` on the inputs of `inputs`.
Dataset rbf_label(const RbfChain& chain, const Matrix& inputs, std::string name);

/// Text dump in the style of the network checkpoint ("grownet-rbf 1",
/// center, one hex-float line per layer).
void save_rbf_checkpoint(const RbfChain& chain, std::ostream& out);
void save_rbf_checkpoint(const RbfChain& chain, const std::filesystem::path& path);
RbfChain load_rbf_checkpoint(std::istream& in);
RbfChain load_rbf_checkpoint(const std::filesystem::path& path);

}  // namespace grownet
