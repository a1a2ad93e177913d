#include "grownet/rbf.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace grownet {

void RbfChain::validate() const {
    if (center == 0.0 || !std::isfinite(center)) throw std::invalid_argument("RBF center must be nonzero");
}

std::vector<double> RbfChain::parameters() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& l : layers) {
        out.push_back(l.scale);
        out.push_back(l.shift);
        out.push_back(l.amplitude);
    }
    return out;
}

void RbfChain::set_parameters(std::span<const double> flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("RBF parameter vector has wrong length");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        layers[k].scale = flat[3 * k];
        layers[k].shift = flat[3 * k + 1];
        layers[k].amplitude = flat[3 * k + 2];
    }
}

std::vector<unsigned char> RbfChain::trainable_mask() const {
    std::vector<unsigned char> mask;
    for (const auto& l : layers) mask.insert(mask.end(), 3, l.frozen ? 0 : 1);
    return mask;
}

double RbfChain::layer_map(const RbfLayer& l, double x) const {
    const double u = l.scale * x + l.shift - center;
    return l.amplitude * (std::exp(-0.5 * u * u) - std::exp(-0.5 * center * center));
}

namespace {

void check_scalar(const Dataset& data) {
    if (data.input_dim() != 1 || data.output_dim() != 1)
        throw std::invalid_argument("RBF chain needs one input and one label column");
    if (data.size() == 0) throw std::invalid_argument("empty batch");
}

}  // namespace

double rbf_loss(const RbfChain& chain, const Dataset& data) {
    chain.validate();
    check_scalar(data);
    double total = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        double x = data.inputs(s, 0);
        for (const auto& l : chain.layers) x += chain.layer_map(l, x);
        const double r = x - data.labels(s, 0);
        total += 0.5 * r * r;
    }
    const double j = total / static_cast<double>(data.size());
    if (!std::isfinite(j)) throw NumericError("non-finite RBF loss");
    return j;
}

RbfTrace rbf_forward_adjoint(const RbfChain& chain, const Dataset& data) {
    chain.validate();
    check_scalar(data);
    const std::size_t S = data.size();
    const std::size_t L = chain.layers.size();
    const double c = chain.center;
    const double tail = std::exp(-0.5 * c * c);

    RbfTrace t;
    t.states.assign(L + 1, std::vector<double>(S));
    t.adjoints.assign(L + 1, std::vector<double>(S));
    t.grads.assign(3 * L, 0.0);
    const double inv_s = 1.0 / static_cast<double>(S);

    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        double x = data.inputs(s, 0);
        t.states[0][s] = x;
        for (std::size_t k = 0; k < L; ++k) {
            x += chain.layer_map(chain.layers[k], x);
            t.states[k + 1][s] = x;
        }
        const double r = x - data.labels(s, 0);
        total += 0.5 * r * r;

        double p = -inv_s * r;
        t.adjoints[L][s] = p;
        for (std::size_t k = L; k-- > 0;) {
            const RbfLayer& l = chain.layers[k];
            const double xin = t.states[k][s];
            const double u = l.scale * xin + l.shift - c;
            const double e = std::exp(-0.5 * u * u);
            // dg/dx, dg/dw, dg/ds, dg/da
            const double dgdu = -l.amplitude * u * e;
            if (!l.frozen) {
                t.grads[3 * k] -= p * dgdu * xin;
                t.grads[3 * k + 1] -= p * dgdu;
                t.grads[3 * k + 2] -= p * (e - tail);
            }
            p *= 1.0 + dgdu * l.scale;
            t.adjoints[k][s] = p;
        }
    }
    t.loss = total * inv_s;
    if (!std::isfinite(t.loss)) throw NumericError("non-finite RBF loss");
    return t;
}

Matrix rbf_block(const RbfTrace& trace, std::size_t interface, double center) {
    if (interface >= trace.states.size()) throw std::invalid_argument("RBF interface out of range");
    const double c1 = center * std::exp(-0.5 * center * center);
    double px = 0.0;
    double p = 0.0;
    const auto& xs = trace.states[interface];
    const auto& ps = trace.adjoints[interface];
    for (std::size_t s = 0; s < xs.size(); ++s) {
        px += ps[s] * xs[s];
        p += ps[s];
    }
    Matrix q(3, 3);
    q(0, 2) = q(2, 0) = 0.5 * c1 * px;
    q(1, 2) = q(2, 1) = 0.5 * c1 * p;
    return q;
}

RbfChain rbf_insert(const RbfChain& chain, std::size_t interface, std::span<const double> direction,
                    double eps) {
    if (interface > chain.layers.size()) throw std::invalid_argument("RBF interface out of range");
    if (direction.size() != 3) throw std::invalid_argument("RBF direction must have 3 entries");
    if (!(eps >= 0.0)) throw std::invalid_argument("insertion scale must be >= 0");
    if (eps > 0.0 && std::abs(norm2(direction) - 1.0) > 1e-10)
        throw std::invalid_argument("insertion direction must have unit norm");
    RbfChain out = chain;
    RbfLayer l{eps * direction[0], eps * direction[1], eps * direction[2], false};
    out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(interface), l);
    return out;
}

TopoReport rbf_scan(const RbfChain& chain, const Dataset& data) {
    const RbfTrace t = rbf_forward_adjoint(chain, data);
    std::vector<std::vector<TopoBlock>> all;
    for (std::size_t l = 0; l < chain.interface_count(); ++l) {
        TopoBlock b;
        b.interface = l;
        b.neuron = 0;
        b.q = rbf_block(t, l, chain.center);
        auto eig = jacobi_eigh(b.q);
        b.top_eigenvalue = eig.values.front();
        b.top_eigenvector = eig.vector(0);
        all.push_back({std::move(b)});
    }
    return build_report(all, WidthRule::fixed(1));
}

Matrix rbf_finite_difference_hessian(const RbfChain& chain, const Dataset& data, std::size_t interface,
                                     double step) {
    auto loss_at = [&](std::size_t i, double di, std::size_t j, double dj) {
        RbfChain probe = chain;
        std::array<double, 3> th{0.0, 0.0, 0.0};
        th[i] += di;
        th[j] += dj;
        probe.layers.insert(probe.layers.begin() + static_cast<std::ptrdiff_t>(interface),
                            RbfLayer{th[0], th[1], th[2], false});
        return rbf_loss(probe, data);
    };
    const double j0 = rbf_loss(chain, data);
    const double h2 = step * step;
    Matrix h(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        h(i, i) = (loss_at(i, step, i, 0.0) - 2.0 * j0 + loss_at(i, -step, i, 0.0)) / h2;
        for (std::size_t j = i + 1; j < 3; ++j) {
            const double v = (loss_at(i, step, j, step) - loss_at(i, step, j, -step) -
                              loss_at(i, -step, j, step) + loss_at(i, -step, j, -step)) /
                             (4.0 * h2);
            h(i, j) = h(j, i) = v;
        }
    }
    return h;
}

Dataset rbf_label(const RbfChain& chain, const Matrix& inputs, std::string name) {
    Dataset d;
    d.name = std::move(name);
    d.inputs = inputs;
    d.labels = Matrix(inputs.rows(), 1);
    for (std::size_t s = 0; s < inputs.rows(); ++s) {
        double x = inputs(s, 0);
        for (const auto& l : chain.layers) x += chain.layer_map(l, x);
        d.labels(s, 0) = x;
    }
    return d;
}

RbfProblem gen_rbf_dataset(std::uint64_t seed, std::size_t train, std::size_t validation, std::size_t test,
                           std::size_t depth, double center) {
    Rng truth_rng = Rng(seed).fork(11);
    Rng sample_rng = Rng(seed).fork(12);
    RbfProblem prob;
    prob.truth.center = center;
    const double sd = std::sqrt(3.0);
    for (std::size_t k = 0; k < depth; ++k) {
        RbfLayer l;
        l.scale = sd * truth_rng.normal();
        l.shift = sd * truth_rng.normal();
        l.amplitude = sd * truth_rng.normal();
        prob.truth.layers.push_back(l);
    }
    auto draw = [&](std::size_t count, const char* name) {
        Matrix x(count, 1);
        for (double& v : x.data()) v = sample_rng.uniform(-2.0, 2.0);
        return rbf_label(prob.truth, x, name);
    };
    prob.splits.train = draw(train, "rbf-train");
    prob.splits.validation = draw(validation, "rbf-validation");
    prob.splits.test = draw(test, "rbf-test");
    return prob;
}

namespace {

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw IoError("rbf checkpoint: bad number '" + tok + "'");
    return v;
}

}  // namespace

void save_rbf_checkpoint(const RbfChain& chain, std::ostream& out) {
    out << "grownet-rbf 1\n";
    out << "center " << hex(chain.center) << '\n';
    out << "layers " << chain.layers.size() << '\n';
    for (const auto& l : chain.layers)
        out << "l " << hex(l.scale) << ' ' << hex(l.shift) << ' ' << hex(l.amplitude) << ' ' << (l.frozen ? 1 : 0)
            << '\n';
    out << "end\n";
}

void save_rbf_checkpoint(const RbfChain& chain, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    save_rbf_checkpoint(chain, out);
    if (!out) throw IoError("write failed for " + path.string());
}

RbfChain load_rbf_checkpoint(std::istream& in) {
    std::string word;
    std::string version;
    if (!(in >> word >> version) || word != "grownet-rbf" || version != "1")
        throw IoError("rbf checkpoint: bad header");
    RbfChain chain;
    std::string tok;
    std::size_t count = 0;
    if (!(in >> word >> tok) || word != "center") throw IoError("rbf checkpoint: missing center");
    chain.center = parse_hex(tok);
    if (!(in >> word >> count) || word != "layers") throw IoError("rbf checkpoint: missing layer count");
    for (std::size_t k = 0; k < count; ++k) {
        std::string a, b, c;
        int frozen = 0;
        if (!(in >> word >> a >> b >> c >> frozen) || word != "l") throw IoError("rbf checkpoint: bad layer line");
        chain.layers.push_back({parse_hex(a), parse_hex(b), parse_hex(c), frozen != 0});
    }
    if (!(in >> word) || word != "end") throw IoError("rbf checkpoint: missing end marker");
    chain.validate();
    return chain;
}

RbfChain load_rbf_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return load_rbf_checkpoint(in);
}

}  // namespace grownet
