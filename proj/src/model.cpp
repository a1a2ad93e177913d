#include "grownet/model.hpp"

namespace grownet {

Network model_fresh(const Network& shape, Rng& rng, double init_std) {
    return Network(shape.spec(), rng, init_std);
}

Network model_noisy_insert(const Network& m, std::size_t l, Rng& rng, double noise_std) {
    const std::size_t n = m.spec().width;
    DenseLayer layer(n, n);
    for (double& w : layer.weight.data()) w = noise_std * rng.normal();
    for (double& b : layer.bias) b = noise_std * rng.normal();
    Network out = m;
    out.insert_hidden(l, std::move(layer));
    return out;
}

std::vector<double> model_gradient(const RbfChain& m, const Dataset& d, double* loss) {
    RbfTrace t = rbf_forward_adjoint(m, d);
    if (loss) *loss = t.loss;
    return std::move(t.grads);
}

void model_freeze_existing(RbfChain& m) {
    for (auto& l : m.layers) l.frozen = true;
}

void model_unfreeze(RbfChain& m) {
    for (auto& l : m.layers) l.frozen = false;
}

RbfChain model_fresh(const RbfChain& shape, Rng& rng, double init_std) {
    RbfChain out = shape;
    for (auto& l : out.layers) {
        l.scale = init_std * rng.normal();
        l.shift = init_std * rng.normal();
        l.amplitude = init_std * rng.normal();
        l.frozen = false;
    }
    return out;
}

RbfChain model_noisy_insert(const RbfChain& m, std::size_t l, Rng& rng, double noise_std) {
    if (l > m.layers.size()) throw std::invalid_argument("RBF interface out of range");
    RbfChain out = m;
    RbfLayer layer;
    layer.scale = noise_std * rng.normal();
    layer.shift = noise_std * rng.normal();
    layer.amplitude = noise_std * rng.normal();
    out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(l), layer);
    return out;
}

namespace {

double mse(const Matrix& z, const Matrix& c) {
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = z.data()[i] - c.data()[i];
        total += r * r;
    }
    return z.size() == 0 ? 0.0 : total / static_cast<double>(z.size());
}

}  // namespace

double model_mse(const Network& m, const Dataset& d) { return mse(forward(m, d).output, d.labels); }

double model_mse(const RbfChain& m, const Dataset& d) { return mse(rbf_label(m, d.inputs, d.name).labels, d.labels); }

}  // namespace grownet
