#include "grownet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace grownet {

namespace {

// Ridders' extrapolation of central differences: a tableau of estimates at
// steps h, h/c, h/c^2, ... returning the entry with the smallest error
// estimate.
double ridders(const std::function<double(double)>& f, double h) {
    constexpr int kSize = 10;
    constexpr double kShrink = 1.4;
    constexpr double kShrink2 = kShrink * kShrink;
    double a[kSize][kSize];
    a[0][0] = (f(h) - f(-h)) / (2.0 * h);
    double best = a[0][0];
    double err = std::numeric_limits<double>::max();
    for (int i = 1; i < kSize; ++i) {
        h /= kShrink;
        a[0][i] = (f(h) - f(-h)) / (2.0 * h);
        double fac = kShrink2;
        for (int j = 1; j <= i; ++j) {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= kShrink2;
            const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
            if (e <= err) {
                err = e;
                best = a[j][i];
            }
        }
        if (std::abs(a[i][i] - a[i - 1][i - 1]) >= 2.0 * err) break;
    }
    return best;
}

}  // namespace

GradCheckResult check_gradient(const Network& net, const Dataset& batch, double step, double floor) {
    const std::vector<double> grad = loss_gradient(net, batch);
    const std::vector<double> base = net.parameters();
    const std::vector<unsigned char> mask = net.trainable_mask();
    Network probe = net;
    double gmax = 1.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    const double scale = floor * gmax;
    GradCheckResult r;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (!mask[i]) continue;
        const double fd = ridders(
            [&](double delta) {
                std::vector<double> p = base;
                p[i] += delta;
                probe.set_parameters(p);
                return evaluate_loss(probe, batch);
            },
            step);
        const double err = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), scale});
        ++r.checked;
        if (err > r.max_rel_error) {
            r.max_rel_error = err;
            r.worst_index = i;
        }
    }
    return r;
}

RandomProblem random_problem(Rng& rng, LossKind loss, std::size_t max_width, std::size_t max_hidden,
                             std::size_t max_samples) {
    static const char* const pairs[] = {"swish+tanh", "mish+tanh", "swish+mish"};
    NetworkSpec spec;
    spec.width = 1 + rng.index(max_width);
    spec.hidden_count = rng.index(max_hidden + 1);
    spec.input_dim = 1 + rng.index(4);
    spec.output_dim = loss == LossKind::CrossEntropy ? 2 + rng.index(3) : 1 + rng.index(3);
    spec.activation = make_admissible(pairs[rng.index(3)]);
    spec.loss = loss;
    Network net(spec);
    auto init = [&](DenseLayer& l) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        for (double& w : l.weight.data()) w = sd * rng.normal();
        for (double& b : l.bias) b = 0.5 * rng.normal();
    };
    init(net.params().input);
    for (auto& l : net.params().hidden) init(l);
    init(net.params().output);

    const std::size_t S = 1 + rng.index(max_samples);
    Dataset batch;
    batch.name = "random";
    batch.inputs = Matrix(S, spec.input_dim);
    for (double& v : batch.inputs.data()) v = rng.normal();
    batch.labels = Matrix(S, spec.output_dim);
    for (std::size_t s = 0; s < S; ++s) {
        if (loss == LossKind::CrossEntropy) batch.labels(s, rng.index(spec.output_dim)) = 1.0;
        else
            for (std::size_t j = 0; j < spec.output_dim; ++j) batch.labels(s, j) = rng.normal();
    }
    return {std::move(net), std::move(batch)};
}

GradCheckSweep gradcheck_sweep(std::uint64_t seed, std::size_t networks) {
    GradCheckSweep out;
    for (std::size_t k = 0; k < networks; ++k) {
        Rng rng = Rng(seed).fork(k);
        const LossKind loss = k % 2 == 0 ? LossKind::MeanSquared : LossKind::CrossEntropy;
        const RandomProblem p = random_problem(rng, loss);
        out.max_rel_error = std::max(out.max_rel_error, check_gradient(p.net, p.batch).max_rel_error);
        ++out.networks;
    }
    return out;
}

}  // namespace grownet
