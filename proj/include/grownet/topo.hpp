#pragma once

// Topological derivative of the training loss with respect to inserting a
// zero-initialized residual layer.
//
// For a layer inserted at interface l with weights eps * phi,
//
//   J(eps) = J(0) - eps^2 phi^T Q_l phi + O(eps^3),
//
// and for the residual fully-connected layer Q_l is block diagonal, one
// block per output neuron r of the new layer:
//
//   Q_l^(r) = 1/2 sigma''(0) sum_s p_{s,l}^(r) x_{s,l} x_{s,l}^T.
//
// The best direction activates the neurons with the largest block
// eigenvalues and initializes each with that block's top eigenvector.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grownet/data.hpp"
#include "grownet/linalg.hpp"
#include "grownet/network.hpp"

namespace grownet {

struct TopoBlock {
    std::size_t interface = 0;
    std::size_t neuron = 0;  // 0-based slot in the new layer
    Matrix q;
    double top_eigenvalue = 0.0;
    std::vector<double> top_eigenvector;
};

enum class WidthMode { Fixed, Auto };

std::string_view to_string(WidthMode m);

/// How many neurons of the new layer to activate: a fixed count m, or the
/// largest m with (lambda_1 - lambda_m) / lambda_1 <= tolerance.
struct WidthRule {
    WidthMode mode = WidthMode::Fixed;
    std::size_t count = 1;
    double tolerance = 0.5;

    static WidthRule fixed(std::size_t m) { return {WidthMode::Fixed, m, 0.0}; }
    static WidthRule automatic(double eps_s) { return {WidthMode::Auto, 0, eps_s}; }
};

struct DirectionChoice {
    double lambda = 0.0;             // sum of selected block eigenvalues
    std::vector<double> direction;   // unit, blocks * block_dim long; empty if nothing selected
    std::size_t width = 0;           // neurons activated
    std::vector<std::size_t> neurons;  // activated slots, by decreasing eigenvalue
};

/// Blocks of one interface, ordered by neuron. Throws std::invalid_argument
/// for an interface outside 1..R+1 or a trace without adjoints.
std::vector<TopoBlock> assemble_blocks(const Network& net, const Trace& trace, std::size_t interface);

/// Picks neurons by descending block eigenvalue. Blocks with a non-positive
/// top eigenvalue are never picked. When none is positive the result has
/// width 0, an empty direction and lambda = the largest block eigenvalue.
DirectionChoice select_direction(std::span<const TopoBlock> blocks, const WidthRule& rule);

/// The dense block-diagonal Q_l (blocks * d square).
Matrix full_q(std::span<const TopoBlock> blocks);

struct InterfaceReport {
    std::size_t interface = 0;
    DirectionChoice choice;
    double score = 0.0;  // lambda, or lambda / width in auto mode
    std::vector<double> block_top_eigenvalues;  // by neuron
};

struct TopoReport {
    WidthMode mode = WidthMode::Fixed;
    std::vector<InterfaceReport> interfaces;
    std::optional<std::size_t> chosen;  // empty when no score is positive
    double max_score = 0.0;

    const InterfaceReport& at(std::size_t interface) const;
    bool should_insert(double threshold) const { return chosen.has_value() && max_score >= threshold; }
};

/// Builds a report from per-interface block lists; the chosen interface is
/// the one with the largest score, ties going to the smallest index.
TopoReport build_report(const std::vector<std::vector<TopoBlock>>& blocks_per_interface, const WidthRule& rule);

/// Full scan of a network over one dataset (forward + adjoint inside).
TopoReport scan(const Network& net, const Dataset& data, const WidthRule& rule);
TopoReport scan(const Network& net, const Trace& trace, const WidthRule& rule);

/// (J(0) - J(eps phi)) / eps^2 for each eps, by actually inserting the layer
/// and running a forward pass.
struct DerivativeSample {
    double eps;
    double ratio;
};
std::vector<DerivativeSample> numerical_derivative(const Network& net, const Dataset& data,
                                                   std::size_t interface, std::span<const double> phi,
                                                   std::span<const double> eps_list);

/// Limit of the ratio above as eps -> 0, estimated from symmetric
/// differences at eps and eps/2 combined by Richardson extrapolation
/// (error O(eps^4)).
double extrapolated_derivative(const Network& net, const Dataset& data, std::size_t interface,
                               std::span<const double> phi, double eps = 1e-3);

/// Central-difference Hessian of J with respect to the weights of a
/// zero-initialized layer inserted at `interface`, using forward passes only.
Matrix finite_difference_hessian(const Network& net, const Dataset& data, std::size_t interface,
                                 double step = 1e-3);

struct RankedInterface {
    std::size_t interface;
    double lambda;
};

/// Interfaces of a trained network ordered by decreasing lambda (m = 1) on a
/// new dataset. Throws std::invalid_argument on dimension mismatch.
std::vector<RankedInterface> transfer_rank(const Network& net, const Dataset& new_data);

/// {"interfaces":[{"l":..,"lambda":..,"m":..,"top_block_eigs":[..]}],"chosen":..,"mode":".."}
std::string report_to_json(const TopoReport& report);

}  // namespace grownet
