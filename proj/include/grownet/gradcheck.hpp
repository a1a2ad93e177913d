#pragma once

// Finite-difference check of the adjoint gradient.

#include <cstddef>
#include <cstdint>

#include "grownet/network.hpp"

namespace grownet {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;  // flattened parameter index
    std::size_t checked = 0;      // parameters compared
};

/// Compares loss_gradient with central differences extrapolated to zero
/// step (Ridders, starting at `step`). The error of entry i is
/// |a - b| / max(|a|, |b|, floor * max(1, max_j |a_j|)), so entries many
/// orders below the largest gradient are judged against its rounding level.
GradCheckResult check_gradient(const Network& net, const Dataset& batch, double step = 0.01,
                               double floor = 1e-6);

struct RandomProblem {
    Network net;
    Dataset batch;
};

/// Random residual network (width 1..max_width, 0..max_hidden residual
/// layers, random activation pair) with N(0, 1/fan_in) weights, N(0, 0.5^2) biases and a random
/// batch of 1..max_samples samples. Cross-entropy problems get one-hot labels.
RandomProblem random_problem(Rng& rng, LossKind loss, std::size_t max_width = 8, std::size_t max_hidden = 6,
                             std::size_t max_samples = 16);

struct GradCheckSweep {
    double max_rel_error = 0.0;
    std::size_t networks = 0;
};

/// check_gradient over `networks` random problems, alternating the loss.
GradCheckSweep gradcheck_sweep(std::uint64_t seed, std::size_t networks);

}  // namespace grownet
