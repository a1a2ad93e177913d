#include "grownet/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace grownet {

std::string_view to_string(LossKind k) {
    return k == LossKind::MeanSquared ? "mse" : "cross-entropy";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "mse" || name == "MSE") return LossKind::MeanSquared;
    if (name == "cross-entropy" || name == "ce" || name == "cross_entropy") return LossKind::CrossEntropy;
    throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

namespace {

double log_sum_exp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

}  // namespace

double sample_loss(LossKind kind, std::span<const double> z, std::span<const double> c) {
    if (kind == LossKind::MeanSquared) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - c[i]) * (z[i] - c[i]);
        return 0.5 * s;
    }
    const double lse = log_sum_exp(z);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += c[i] * (lse - z[i]);
    return s;
}

void sample_loss_gradient(LossKind kind, std::span<const double> z, std::span<const double> c,
                          std::span<double> grad) {
    if (kind == LossKind::MeanSquared) {
        for (std::size_t i = 0; i < z.size(); ++i) grad[i] = z[i] - c[i];
        return;
    }
    const double lse = log_sum_exp(z);
    const double mass = std::accumulate(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) grad[i] = std::exp(z[i] - lse) * mass - c[i];
}

void NetworkSpec::validate() const {
    if (input_dim == 0 || output_dim == 0 || width == 0)
        throw std::invalid_argument("network dimensions must be positive");
    if (!(input_sparsity >= 0.0 && input_sparsity < 1.0))
        throw std::invalid_argument("input sparsity must lie in [0, 1)");
}

std::size_t Parameters::count() const noexcept {
    std::size_t n = input.param_count() + output.param_count();
    for (const auto& h : hidden) n += h.param_count();
    return n;
}

namespace {

template <typename Fn>
void for_each_layer(Parameters& p, Fn fn) {
    fn(p.input);
    for (auto& h : p.hidden) fn(h);
    fn(p.output);
}

template <typename Fn>
void for_each_layer(const Parameters& p, Fn fn) {
    fn(p.input);
    for (const auto& h : p.hidden) fn(h);
    fn(p.output);
}

Parameters zeros_like(const Parameters& p) {
    Parameters z;
    z.input = DenseLayer(p.input.weight.rows(), p.input.weight.cols());
    for (const auto& h : p.hidden) z.hidden.emplace_back(h.weight.rows(), h.weight.cols());
    z.output = DenseLayer(p.output.weight.rows(), p.output.weight.cols());
    return z;
}

}  // namespace

std::vector<double> Parameters::flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for_each_layer(*this, [&](const DenseLayer& l) {
        flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    });
    return flat;
}

void Parameters::assign(std::span<const double> flat) {
    if (flat.size() != count()) throw std::invalid_argument("parameter vector has wrong length");
    std::size_t at = 0;
    for_each_layer(*this, [&](DenseLayer& l) {
        auto w = l.weight.data();
        std::copy(flat.begin() + at, flat.begin() + at + w.size(), w.begin());
        at += w.size();
        std::copy(flat.begin() + at, flat.begin() + at + l.bias.size(), l.bias.begin());
        at += l.bias.size();
    });
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const std::size_t n = spec_.width;
    params_.input = DenseLayer(n, spec_.input_dim);
    for (std::size_t k = 0; k < spec_.hidden_count; ++k) params_.hidden.emplace_back(n, n);
    params_.output = DenseLayer(spec_.output_dim, n);
    input_mask_.assign(params_.input.weight.size(), 0);
}

Network::Network(NetworkSpec spec, Rng& rng, double init_std) : Network(std::move(spec)) {
    for_each_layer(params_, [&](DenseLayer& l) {
        for (double& w : l.weight.data()) w = init_std * rng.normal();
        for (double& b : l.bias) b = init_std * rng.normal();
    });
    const std::size_t total = input_mask_.size();
    const auto removed = static_cast<std::size_t>(std::floor(spec_.input_sparsity * static_cast<double>(total)));
    if (removed > 0) {
        std::vector<std::size_t> idx(total);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx);
        std::vector<unsigned char> mask(total, 0);
        for (std::size_t i = 0; i < removed; ++i) mask[idx[i]] = 1;
        set_input_mask(std::move(mask));
    }
}

void Network::set_input_mask(std::vector<unsigned char> mask) {
    if (mask.size() != params_.input.weight.size()) throw std::invalid_argument("input mask has wrong length");
    input_mask_ = std::move(mask);
    auto w = params_.input.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (input_mask_[i]) w[i] = 0.0;
}

void Network::set_parameters(std::span<const double> flat) {
    params_.assign(flat);
    auto w = params_.input.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (input_mask_[i]) w[i] = 0.0;
}

std::vector<unsigned char> Network::trainable_mask() const {
    std::vector<unsigned char> mask;
    mask.reserve(param_count());
    auto push_layer = [&](const DenseLayer& l, const unsigned char* wmask) {
        for (std::size_t i = 0; i < l.weight.size(); ++i)
            mask.push_back(!l.frozen && !(wmask && wmask[i]) ? 1 : 0);
        for (std::size_t i = 0; i < l.bias.size(); ++i) mask.push_back(l.frozen ? 0 : 1);
    };
    push_layer(params_.input, input_mask_.data());
    for (const auto& h : params_.hidden) push_layer(h, nullptr);
    push_layer(params_.output, nullptr);
    return mask;
}

void Network::freeze_hidden() {
    params_.input.frozen = true;
    for (auto& h : params_.hidden) h.frozen = true;
}

void Network::unfreeze_all() {
    for_each_layer(params_, [](DenseLayer& l) { l.frozen = false; });
}

void Network::insert_hidden(std::size_t interface, DenseLayer layer) {
    if (interface < 1 || interface > interface_count())
        throw std::invalid_argument("insertion interface " + std::to_string(interface) + " outside 1.." +
                                    std::to_string(interface_count()));
    if (layer.weight.rows() != spec_.width || layer.weight.cols() != spec_.width ||
        layer.bias.size() != spec_.width)
        throw std::invalid_argument("inserted layer must be width x width");
    params_.hidden.insert(params_.hidden.begin() + static_cast<std::ptrdiff_t>(interface - 1),
                          std::move(layer));
    spec_.hidden_count = params_.hidden.size();
}

namespace {

void check_batch(const Network& net, const Dataset& batch) {
    if (batch.input_dim() != net.spec().input_dim || batch.output_dim() != net.spec().output_dim)
        throw std::invalid_argument("batch dimensions (" + std::to_string(batch.input_dim()) + ", " +
                                    std::to_string(batch.output_dim()) + ") do not match network (" +
                                    std::to_string(net.spec().input_dim) + ", " +
                                    std::to_string(net.spec().output_dim) + ")");
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
}

void require_finite(std::span<const double> v, std::size_t layer) {
    for (double x : v)
        if (!std::isfinite(x)) throw LayerNumericError("non-finite activation", layer);
}

// out = W x + b
void affine(const DenseLayer& l, std::span<const double> x, std::span<double> out) {
    for (std::size_t r = 0; r < l.weight.rows(); ++r) out[r] = dot(l.weight.row(r), x) + l.bias[r];
}

}  // namespace

Trace forward(const Network& net, const Dataset& batch) {
    check_batch(net, batch);
    const auto& spec = net.spec();
    const auto& p = net.params();
    const std::size_t S = batch.size();
    const std::size_t n = spec.width;
    const std::size_t R = p.hidden.size();

    Trace t;
    t.inputs = batch.inputs;
    t.labels = batch.labels;
    t.input_preact = Matrix(S, n);
    t.states.assign(R + 1, Matrix(S, n));
    t.preacts.assign(R, Matrix(S, n));
    t.output = Matrix(S, spec.output_dim);

    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        affine(p.input, batch.inputs.row(s), t.input_preact.row(s));
        auto h0 = t.states[0].row(s);
        for (std::size_t i = 0; i < n; ++i) h0[i] = plain_eval(spec.input_activation, t.input_preact(s, i));
        require_finite(h0, 0);
        for (std::size_t k = 0; k < R; ++k) {
            auto prev = t.states[k].row(s);
            auto a = t.preacts[k].row(s);
            affine(p.hidden[k], prev, a);
            auto next = t.states[k + 1].row(s);
            for (std::size_t i = 0; i < n; ++i) next[i] = prev[i] + spec.activation.eval(a[i]);
            require_finite(next, k + 1);
        }
        affine(p.output, t.states[R].row(s), t.output.row(s));
        require_finite(t.output.row(s), R + 1);
        total += sample_loss(spec.loss, t.output.row(s), batch.labels.row(s));
    }
    t.loss = total / static_cast<double>(S);
    if (!std::isfinite(t.loss)) throw LayerNumericError("non-finite loss", R + 1);
    return t;
}

double evaluate_loss(const Network& net, const Dataset& batch) {
    check_batch(net, batch);
    const auto& spec = net.spec();
    const auto& p = net.params();
    const std::size_t n = spec.width;
    std::vector<double> h(n), a(n), z(spec.output_dim);
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        affine(p.input, batch.inputs.row(s), a);
        for (std::size_t i = 0; i < n; ++i) h[i] = plain_eval(spec.input_activation, a[i]);
        for (const auto& layer : p.hidden) {
            affine(layer, h, a);
            for (std::size_t i = 0; i < n; ++i) h[i] += spec.activation.eval(a[i]);
        }
        affine(p.output, h, z);
        total += sample_loss(spec.loss, z, batch.labels.row(s));
    }
    const double j = total / static_cast<double>(batch.size());
    if (!std::isfinite(j)) throw LayerNumericError("non-finite loss", p.hidden.size() + 1);
    return j;
}

void adjoint(const Network& net, Trace& t) {
    const auto& spec = net.spec();
    const auto& p = net.params();
    const std::size_t S = t.samples();
    const std::size_t n = spec.width;
    const std::size_t R = p.hidden.size();
    if (t.states.size() != R + 1 || S == 0)
        throw std::logic_error("adjoint: trace does not hold forward states for this network");

    t.grads = zeros_like(p);
    t.adjoints.assign(R + 1, Matrix(S, n));
    t.output_adjoint = Matrix(S, spec.output_dim);

    const double inv_s = 1.0 / static_cast<double>(S);
    std::vector<double> delta(n);
    for (std::size_t s = 0; s < S; ++s) {
        auto pz = t.output_adjoint.row(s);
        sample_loss_gradient(spec.loss, t.output.row(s), t.labels.row(s), pz);
        for (double& v : pz) v *= -inv_s;

        // Output map.
        auto hR = t.states[R].row(s);
        auto pR = t.adjoints[R].row(s);
        for (std::size_t o = 0; o < spec.output_dim; ++o) {
            auto gw = t.grads.output.weight.row(o);
            for (std::size_t i = 0; i < n; ++i) gw[i] -= pz[o] * hR[i];
            t.grads.output.bias[o] -= pz[o];
            auto wrow = p.output.weight.row(o);
            for (std::size_t i = 0; i < n; ++i) pR[i] += wrow[i] * pz[o];
        }

        // Residual layers: p_{k-1} = p_k + W_k^T (sigma'(a_k) * p_k).
        for (std::size_t k = R; k-- > 0;) {
            auto pk = t.adjoints[k + 1].row(s);
            auto pprev = t.adjoints[k].row(s);
            auto a = t.preacts[k].row(s);
            auto hprev = t.states[k].row(s);
            const auto& layer = p.hidden[k];
            auto& g = t.grads.hidden[k];
            for (std::size_t r = 0; r < n; ++r) delta[r] = spec.activation.d1(a[r]) * pk[r];
            std::copy(pk.begin(), pk.end(), pprev.begin());
            for (std::size_t r = 0; r < n; ++r) {
                if (delta[r] == 0.0) continue;
                auto wrow = layer.weight.row(r);
                auto gw = g.weight.row(r);
                for (std::size_t i = 0; i < n; ++i) {
                    pprev[i] += wrow[i] * delta[r];
                    gw[i] -= delta[r] * hprev[i];
                }
                g.bias[r] -= delta[r];
            }
        }

        // Input map.
        auto p0 = t.adjoints[0].row(s);
        auto x = t.inputs.row(s);
        for (std::size_t r = 0; r < n; ++r) {
            const double d = plain_d1(spec.input_activation, t.input_preact(s, r)) * p0[r];
            auto gw = t.grads.input.weight.row(r);
            for (std::size_t i = 0; i < x.size(); ++i) gw[i] -= d * x[i];
            t.grads.input.bias[r] -= d;
        }
    }

    const auto& mask = net.input_mask();
    auto gin = t.grads.input.weight.data();
    for (std::size_t i = 0; i < gin.size(); ++i)
        if (mask[i]) gin[i] = 0.0;
    auto zero_if_frozen = [](const DenseLayer& src, DenseLayer& g) {
        if (!src.frozen) return;
        std::fill(g.weight.data().begin(), g.weight.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
    };
    zero_if_frozen(p.input, t.grads.input);
    for (std::size_t k = 0; k < R; ++k) zero_if_frozen(p.hidden[k], t.grads.hidden[k]);
    zero_if_frozen(p.output, t.grads.output);
    t.has_adjoints = true;
}

std::vector<double> loss_gradient(const Network& net, const Dataset& batch, double* loss) {
    Trace t = forward(net, batch);
    adjoint(net, t);
    if (loss) *loss = t.loss;
    return t.grads.flatten();
}

Network insert_layer(const Network& net, std::size_t interface, std::span<const double> direction,
                     double eps) {
    const std::size_t n = net.spec().width;
    if (direction.size() != n * n)
        throw std::invalid_argument("direction length " + std::to_string(direction.size()) + " != n*n = " +
                                    std::to_string(n * n));
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("insertion scale must be >= 0");
    if (eps > 0.0 && std::abs(norm2(direction) - 1.0) > 1e-10)
        throw std::invalid_argument("insertion direction must have unit norm");
    DenseLayer layer(n, n);
    auto w = layer.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = eps * direction[i];
    Network out = net;
    out.insert_hidden(interface, std::move(layer));
    return out;
}

double hamiltonian_at(const Network& net, const Trace& trace, std::size_t interface,
                      std::span<const double> theta_probe) {
    const std::size_t n = net.spec().width;
    if (interface < 1 || interface > net.interface_count())
        throw std::invalid_argument("interface out of range");
    if (theta_probe.size() != n * n) throw std::invalid_argument("probe length must be n*n");
    if (!trace.has_adjoints) throw std::logic_error("hamiltonian_at: trace has no adjoints");
    const Matrix& x = trace.state_at(interface);
    const Matrix& pa = trace.adjoint_at(interface);
    double h = 0.0;
    for (std::size_t s = 0; s < trace.samples(); ++s) {
        auto xs = x.row(s);
        auto ps = pa.row(s);
        for (std::size_t r = 0; r < n; ++r) {
            const double a = dot(theta_probe.subspan(r * n, n), xs);
            h += ps[r] * (xs[r] + net.spec().activation.eval(a));
        }
    }
    return h;
}

// Checkpoint format (line oriented):
//   grownet-checkpoint 1
//   <key> <value>                 spec fields
//   layer <kind> <rows> <cols> <frozen>
//   w <hex> <hex> ...             one line per weight row
//   b <hex> ...
//   m <0/1> ...                   input layer only
//   end
namespace {

constexpr int kCheckpointVersion = 1;

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw IoError("checkpoint: bad number '" + tok + "'");
    return v;
}

void write_layer(std::ostream& out, const char* kind, const DenseLayer& l, const std::vector<unsigned char>* mask) {
    out << "layer " << kind << ' ' << l.weight.rows() << ' ' << l.weight.cols() << ' ' << (l.frozen ? 1 : 0)
        << '\n';
    for (std::size_t r = 0; r < l.weight.rows(); ++r) {
        out << 'w';
        for (double v : l.weight.row(r)) out << ' ' << hex(v);
        out << '\n';
    }
    out << 'b';
    for (double v : l.bias) out << ' ' << hex(v);
    out << '\n';
    if (mask) {
        out << 'm';
        for (unsigned char m : *mask) out << ' ' << int(m);
        out << '\n';
    }
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
}

std::string_view to_string(PlainActivation a) { return a == PlainActivation::Tanh ? "tanh" : "identity"; }

}  // namespace

void save_checkpoint(const Network& net, std::ostream& out) {
    const auto& s = net.spec();
    out << "grownet-checkpoint " << kCheckpointVersion << '\n';
    out << "input_dim " << s.input_dim << '\n';
    out << "output_dim " << s.output_dim << '\n';
    out << "width " << s.width << '\n';
    out << "hidden_count " << s.hidden_count << '\n';
    out << "activation " << s.activation.name << '\n';
    out << "input_activation " << to_string(s.input_activation) << '\n';
    out << "input_sparsity " << hex(s.input_sparsity) << '\n';
    out << "loss " << to_string(s.loss) << '\n';
    write_layer(out, "input", net.input_layer(), &net.input_mask());
    for (const auto& h : net.hidden_layers()) write_layer(out, "hidden", h, nullptr);
    write_layer(out, "output", net.output_layer(), nullptr);
    out << "end\n";
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    save_checkpoint(net, out);
    if (!out) throw IoError("write failed for " + path.string());
}

Network load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("checkpoint: empty stream");
    auto head = tokens(line);
    if (head.size() != 2 || head[0] != "grownet-checkpoint") throw IoError("checkpoint: bad header");
    if (head[1] != std::to_string(kCheckpointVersion))
        throw IoError("checkpoint: unsupported version " + head[1]);

    NetworkSpec spec;
    std::vector<DenseLayer> layers;
    std::vector<std::string> kinds;
    std::vector<unsigned char> mask;
    bool ended = false;
    while (std::getline(in, line)) {
        auto tok = tokens(line);
        if (tok.empty()) continue;
        const std::string& key = tok[0];
        if (key == "end") {
            ended = true;
            break;
        }
        if (key == "layer") {
            if (tok.size() != 5) throw IoError("checkpoint: malformed layer line");
            DenseLayer l(std::stoul(tok[2]), std::stoul(tok[3]));
            l.frozen = tok[4] == "1";
            for (std::size_t r = 0; r < l.weight.rows(); ++r) {
                if (!std::getline(in, line)) throw IoError("checkpoint: truncated layer");
                auto w = tokens(line);
                if (w.size() != l.weight.cols() + 1 || w[0] != "w") throw IoError("checkpoint: bad weight row");
                for (std::size_t c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = parse_hex(w[c + 1]);
            }
            if (!std::getline(in, line)) throw IoError("checkpoint: truncated layer");
            auto b = tokens(line);
            if (b.size() != l.bias.size() + 1 || b[0] != "b") throw IoError("checkpoint: bad bias row");
            for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = parse_hex(b[i + 1]);
            if (tok[1] == "input") {
                if (!std::getline(in, line)) throw IoError("checkpoint: truncated layer");
                auto m = tokens(line);
                if (m.size() != l.weight.size() + 1 || m[0] != "m") throw IoError("checkpoint: bad mask row");
                for (std::size_t i = 1; i < m.size(); ++i) mask.push_back(m[i] == "1" ? 1 : 0);
            }
            kinds.push_back(tok[1]);
            layers.push_back(std::move(l));
            continue;
        }
        if (tok.size() != 2) throw IoError("checkpoint: malformed line '" + line + "'");
        const std::string& v = tok[1];
        if (key == "input_dim") spec.input_dim = std::stoul(v);
        else if (key == "output_dim") spec.output_dim = std::stoul(v);
        else if (key == "width") spec.width = std::stoul(v);
        else if (key == "hidden_count") spec.hidden_count = std::stoul(v);
        else if (key == "activation") spec.activation = make_admissible(v);
        else if (key == "input_activation")
            spec.input_activation = v == "tanh" ? PlainActivation::Tanh : PlainActivation::Identity;
        else if (key == "input_sparsity") spec.input_sparsity = parse_hex(v);
        else if (key == "loss") spec.loss = parse_loss_kind(v);
        else throw IoError("checkpoint: unknown key '" + key + "'");
    }
    if (!ended) throw IoError("checkpoint: missing end marker");
    if (layers.size() != spec.hidden_count + 2 || kinds.front() != "input" || kinds.back() != "output")
        throw IoError("checkpoint: layer list does not match hidden_count");

    Network net(spec);
    auto& p = net.params();
    p.input = std::move(layers.front());
    p.output = std::move(layers.back());
    for (std::size_t k = 0; k < spec.hidden_count; ++k) p.hidden[k] = std::move(layers[k + 1]);
    if (p.input.weight.rows() != spec.width || p.input.weight.cols() != spec.input_dim ||
        p.output.weight.rows() != spec.output_dim || p.output.weight.cols() != spec.width)
        throw IoError("checkpoint: layer shapes do not match spec");
    net.set_input_mask(std::move(mask));
    return net;
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return load_checkpoint(in);
}

}  // namespace grownet
