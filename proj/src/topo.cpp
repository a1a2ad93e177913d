#include "grownet/topo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace grownet {

std::string_view to_string(WidthMode m) { return m == WidthMode::Fixed ? "fixed" : "auto"; }

std::vector<TopoBlock> assemble_blocks(const Network& net, const Trace& trace, std::size_t interface) {
    if (interface < 1 || interface > net.interface_count())
        throw std::invalid_argument("interface " + std::to_string(interface) + " outside 1.." +
                                    std::to_string(net.interface_count()));
    if (!trace.has_adjoints) throw std::invalid_argument("assemble_blocks: trace has no adjoints");
    const std::size_t n = net.spec().width;
    const double half_curv = 0.5 * net.spec().activation.curvature_at_zero;
    const Matrix& x = trace.state_at(interface);
    const Matrix& p = trace.adjoint_at(interface);

    std::vector<TopoBlock> blocks(n);
    for (std::size_t r = 0; r < n; ++r) {
        TopoBlock& b = blocks[r];
        b.interface = interface;
        b.neuron = r;
        b.q = Matrix(n, n);
        for (std::size_t s = 0; s < trace.samples(); ++s) {
            const double w = half_curv * p(s, r);
            if (w == 0.0) continue;
            auto xs = x.row(s);
            for (std::size_t i = 0; i < n; ++i) {
                const double wi = w * xs[i];
                for (std::size_t j = i; j < n; ++j) b.q(i, j) += wi * xs[j];
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) b.q(i, j) = b.q(j, i);
        auto eig = jacobi_eigh(b.q);
        b.top_eigenvalue = eig.values.front();
        b.top_eigenvector = eig.vector(0);
    }
    return blocks;
}

DirectionChoice select_direction(std::span<const TopoBlock> blocks, const WidthRule& rule) {
    DirectionChoice out;
    if (blocks.empty()) return out;
    const std::size_t dim = blocks.front().q.rows();

    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return blocks[a].top_eigenvalue > blocks[b].top_eigenvalue;
    });

    const double lead = blocks[order.front()].top_eigenvalue;
    if (!(lead > 0.0)) {
        out.lambda = lead;
        return out;
    }

    std::size_t take = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double lam = blocks[order[k]].top_eigenvalue;
        if (!(lam > 0.0)) break;
        if (rule.mode == WidthMode::Fixed) {
            if (k >= rule.count) break;
        } else if ((lead - lam) / lead > rule.tolerance) {
            break;
        }
        take = k + 1;
    }

    out.direction.assign(blocks.size() * dim, 0.0);
    for (std::size_t k = 0; k < take; ++k) {
        const TopoBlock& b = blocks[order[k]];
        out.lambda += b.top_eigenvalue;
        out.neurons.push_back(order[k]);
        const std::size_t slot = order[k] * dim;
        for (std::size_t i = 0; i < dim; ++i) out.direction[slot + i] = b.top_eigenvector[i];
    }
    out.width = take;
    if (take == 0) {
        out.direction.clear();
        return out;
    }
    const double norm = norm2(out.direction);
    for (double& v : out.direction) v /= norm;
    return out;
}

Matrix full_q(std::span<const TopoBlock> blocks) {
    if (blocks.empty()) return {};
    const std::size_t d = blocks.front().q.rows();
    Matrix q(blocks.size() * d, blocks.size() * d);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) q(b * d + i, b * d + j) = blocks[b].q(i, j);
    return q;
}

const InterfaceReport& TopoReport::at(std::size_t interface) const {
    for (const auto& r : interfaces)
        if (r.interface == interface) return r;
    throw std::out_of_range("no report for interface " + std::to_string(interface));
}

TopoReport build_report(const std::vector<std::vector<TopoBlock>>& blocks_per_interface, const WidthRule& rule) {
    TopoReport report;
    report.mode = rule.mode;
    bool first = true;
    for (const auto& blocks : blocks_per_interface) {
        InterfaceReport ir;
        ir.interface = blocks.empty() ? 0 : blocks.front().interface;
        ir.choice = select_direction(blocks, rule);
        ir.score = ir.choice.lambda;
        if (rule.mode == WidthMode::Auto && ir.choice.width > 0)
            ir.score = ir.choice.lambda / static_cast<double>(ir.choice.width);
        for (const auto& b : blocks) ir.block_top_eigenvalues.push_back(b.top_eigenvalue);

        if (first || ir.score > report.max_score) {
            report.max_score = ir.score;
            report.chosen = ir.choice.width > 0 ? std::optional(ir.interface) : std::nullopt;
            first = false;
        }
        report.interfaces.push_back(std::move(ir));
    }
    return report;
}

TopoReport scan(const Network& net, const Trace& trace, const WidthRule& rule) {
    std::vector<std::vector<TopoBlock>> all;
    for (std::size_t l = 1; l <= net.interface_count(); ++l) all.push_back(assemble_blocks(net, trace, l));
    return build_report(all, rule);
}

TopoReport scan(const Network& net, const Dataset& data, const WidthRule& rule) {
    Trace t = forward(net, data);
    adjoint(net, t);
    return scan(net, t, rule);
}

std::vector<DerivativeSample> numerical_derivative(const Network& net, const Dataset& data,
                                                   std::size_t interface, std::span<const double> phi,
                                                   std::span<const double> eps_list) {
    const double j0 = evaluate_loss(net, data);
    std::vector<DerivativeSample> out;
    for (double eps : eps_list) {
        const double je = evaluate_loss(insert_layer(net, interface, phi, eps), data);
        out.push_back({eps, (j0 - je) / (eps * eps)});
    }
    return out;
}

double extrapolated_derivative(const Network& net, const Dataset& data, std::size_t interface,
                               std::span<const double> phi, double eps) {
    const double j0 = evaluate_loss(net, data);
    std::vector<double> neg(phi.begin(), phi.end());
    for (double& v : neg) v = -v;
    auto symmetric = [&](double e) {
        const double jp = evaluate_loss(insert_layer(net, interface, phi, e), data);
        const double jm = evaluate_loss(insert_layer(net, interface, neg, e), data);
        return (j0 - 0.5 * (jp + jm)) / (e * e);
    };
    const double coarse = symmetric(eps);
    const double fine = symmetric(0.5 * eps);
    return (4.0 * fine - coarse) / 3.0;
}

Matrix finite_difference_hessian(const Network& net, const Dataset& data, std::size_t interface,
                                 double step) {
    const std::size_t n = net.spec().width;
    const std::size_t dim = n * n;
    auto loss_at = [&](std::size_t i, double di, std::size_t j, double dj) {
        DenseLayer layer(n, n);
        auto w = layer.weight.data();
        w[i] += di;
        w[j] += dj;
        Network probe = net;
        probe.insert_hidden(interface, std::move(layer));
        return evaluate_loss(probe, data);
    };
    const double j0 = evaluate_loss(net, data);
    const double h2 = step * step;
    Matrix h(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        h(i, i) = (loss_at(i, step, i, 0.0) - 2.0 * j0 + loss_at(i, -step, i, 0.0)) / h2;
        for (std::size_t j = i + 1; j < dim; ++j) {
            const double v = (loss_at(i, step, j, step) - loss_at(i, step, j, -step) -
                              loss_at(i, -step, j, step) + loss_at(i, -step, j, -step)) /
                             (4.0 * h2);
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

std::vector<RankedInterface> transfer_rank(const Network& net, const Dataset& new_data) {
    if (new_data.input_dim() != net.spec().input_dim || new_data.output_dim() != net.spec().output_dim)
        throw std::invalid_argument("transfer_rank: dataset dimensions do not match the network");
    const TopoReport report = scan(net, new_data, WidthRule::fixed(1));
    std::vector<RankedInterface> ranked;
    for (const auto& ir : report.interfaces) ranked.push_back({ir.interface, ir.choice.lambda});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedInterface& a, const RankedInterface& b) { return a.lambda > b.lambda; });
    return ranked;
}

std::string report_to_json(const TopoReport& report) {
    nlohmann::ordered_json j;
    j["interfaces"] = nlohmann::ordered_json::array();
    for (const auto& ir : report.interfaces) {
        nlohmann::ordered_json e;
        e["l"] = ir.interface;
        e["lambda"] = ir.choice.lambda;
        e["score"] = ir.score;
        e["m"] = ir.choice.width;
        e["top_block_eigs"] = ir.block_top_eigenvalues;
        j["interfaces"].push_back(std::move(e));
    }
    if (report.chosen) j["chosen"] = *report.chosen;
    else j["chosen"] = nullptr;
    j["max_score"] = report.max_score;
    j["mode"] = std::string(to_string(report.mode));
    return j.dump();
}

}  // namespace grownet
