#pragma once

// Uniform free-function surface over the two growable model families
// (residual fully-connected Network and scalar RbfChain), so the optimizers
// and growth loops in train.hpp are written once.

#include <concepts>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "grownet/network.hpp"
#include "grownet/rbf.hpp"
#include "grownet/topo.hpp"

namespace grownet {

// Network ------------------------------------------------------------------

inline double model_loss(const Network& m, const Dataset& d) { return evaluate_loss(m, d); }
inline std::vector<double> model_gradient(const Network& m, const Dataset& d, double* loss) {
    return loss_gradient(m, d, loss);
}
inline std::vector<double> model_parameters(const Network& m) { return m.parameters(); }
inline void model_set_parameters(Network& m, std::span<const double> p) { m.set_parameters(p); }
inline std::vector<unsigned char> model_trainable(const Network& m) { return m.trainable_mask(); }
inline TopoReport model_scan(const Network& m, const Dataset& d, const WidthRule& rule) {
    return scan(m, d, rule);
}
inline Network model_insert(const Network& m, std::size_t l, std::span<const double> dir, double eps) {
    return insert_layer(m, l, dir, eps);
}
inline std::pair<std::size_t, std::size_t> model_interfaces(const Network& m) {
    return {1, m.interface_count()};
}
inline std::size_t model_direction_dim(const Network& m) { return m.spec().width * m.spec().width; }
inline std::size_t model_depth(const Network& m) { return m.hidden_layers().size(); }
inline std::size_t model_param_count(const Network& m) { return m.param_count(); }
inline void model_freeze_existing(Network& m) { m.freeze_hidden(); }
inline void model_unfreeze(Network& m) { m.unfreeze_all(); }
/// Every current layer, output map included.
inline void model_freeze_all(Network& m) {
    m.freeze_hidden();
    m.params().output.frozen = true;
}
/// Same architecture (and input mask pattern redrawn), fresh Gaussian init.
Network model_fresh(const Network& shape, Rng& rng, double init_std);
/// Zero layer at l plus N(0, std^2) noise on its weights and biases.
Network model_noisy_insert(const Network& m, std::size_t l, Rng& rng, double noise_std);

// RbfChain -----------------------------------------------------------------

inline double model_loss(const RbfChain& m, const Dataset& d) { return rbf_loss(m, d); }
std::vector<double> model_gradient(const RbfChain& m, const Dataset& d, double* loss);
inline std::vector<double> model_parameters(const RbfChain& m) { return m.parameters(); }
inline void model_set_parameters(RbfChain& m, std::span<const double> p) { m.set_parameters(p); }
inline std::vector<unsigned char> model_trainable(const RbfChain& m) { return m.trainable_mask(); }
/// The chain has width one, so the rule is ignored and m = 1.
inline TopoReport model_scan(const RbfChain& m, const Dataset& d, const WidthRule&) { return rbf_scan(m, d); }
inline RbfChain model_insert(const RbfChain& m, std::size_t l, std::span<const double> dir, double eps) {
    return rbf_insert(m, l, dir, eps);
}
inline std::pair<std::size_t, std::size_t> model_interfaces(const RbfChain& m) {
    return {0, m.layers.size()};
}
inline std::size_t model_direction_dim(const RbfChain&) { return 3; }
inline std::size_t model_depth(const RbfChain& m) { return m.layers.size(); }
inline std::size_t model_param_count(const RbfChain& m) { return m.param_count(); }
void model_freeze_existing(RbfChain& m);
void model_unfreeze(RbfChain& m);
inline void model_freeze_all(RbfChain& m) { model_freeze_existing(m); }
RbfChain model_fresh(const RbfChain& shape, Rng& rng, double init_std);
RbfChain model_noisy_insert(const RbfChain& m, std::size_t l, Rng& rng, double noise_std);

/// Mean squared error per output entry, (1 / (S nT)) sum (z - c)^2.
double model_mse(const Network& m, const Dataset& d);
double model_mse(const RbfChain& m, const Dataset& d);

template <typename M>
concept GrowableModel = std::copyable<M> &&
    requires(M m, const M cm, const Dataset& d, std::span<const double> v, Rng& rng, double* out) {
        { model_loss(cm, d) } -> std::same_as<double>;
        { model_gradient(cm, d, out) } -> std::same_as<std::vector<double>>;
        { model_parameters(cm) } -> std::same_as<std::vector<double>>;
        model_set_parameters(m, v);
        { model_trainable(cm) } -> std::same_as<std::vector<unsigned char>>;
        { model_scan(cm, d, WidthRule{}) } -> std::same_as<TopoReport>;
        { model_insert(cm, std::size_t{}, v, 0.0) } -> std::same_as<M>;
        { model_interfaces(cm) } -> std::same_as<std::pair<std::size_t, std::size_t>>;
        { model_direction_dim(cm) } -> std::same_as<std::size_t>;
        { model_depth(cm) } -> std::same_as<std::size_t>;
        { model_param_count(cm) } -> std::same_as<std::size_t>;
        model_freeze_existing(m);
        model_freeze_all(m);
        model_unfreeze(m);
        { model_fresh(cm, rng, 0.0) } -> std::same_as<M>;
        { model_noisy_insert(cm, std::size_t{}, rng, 0.0) } -> std::same_as<M>;
    };

}  // namespace grownet
