#include "grownet/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "json.hpp"

namespace grownet {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void require(bool ok, const char* field, const char* rule) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + field + " " + rule);
}

// Reads back to the same double.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
    const std::string s = lower(name);
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd") return OptimizerKind::Sgd;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    require(n >= 1, "n", "must be >= 1");
    require(m >= 1 && m <= n, "m", "must be in 1..n");
    require(batch >= 1, "batch", "must be >= 1");
    require(lr > 0.0 && std::isfinite(lr), "lr", "must be > 0");
    require(eps > 0.0 && std::isfinite(eps), "eps", "must be > 0");
    require(tau1 > 0.0 && std::isfinite(tau1), "tau1", "must be > 0");
    require(eps_s >= 0.0 && eps_s <= 1.0, "eps_s", "must be in [0, 1]");
    require(sparsity >= 0.0 && sparsity < 1.0, "sparsity", "must be in [0, 1)");
    require(std::isfinite(eps_threshold), "eps_threshold", "must be finite");
    require(sigma_n >= 0.0 && std::isfinite(sigma_n), "sigma_n", "must be >= 0");
    require(probe_eps > 0.0, "probe_eps", "must be > 0");
    require(max_stage_epochs >= 1, "max_stage_epochs", "must be >= 1");
    try {
        make_admissible(activation_pair);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("config: activation_pair ") + e.what());
    }
}

std::size_t scheduled_epochs(const TrainConfig& cfg, std::size_t iteration) {
    if (iteration < 1) throw std::invalid_argument("iterations are numbered from 1");
    return cfg.epochs_base + cfg.epochs_step * (iteration - 1);
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
}

void Optimizer::step(std::span<double> params, std::span<const double> grads,
                     std::span<const unsigned char> mask) {
    if (grads.size() != params.size() || mask.size() != params.size())
        throw std::invalid_argument("optimizer: parameter, gradient and mask lengths differ");
    ++t_;
    if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i)
            if (mask[i]) params[i] -= lr_ * grads[i];
        return;
    }
    if (m_.size() != params.size()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    }
    const double t = static_cast<double>(t_);
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!mask[i]) continue;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Semi: return "semi";
        case Strategy::Auto: return "auto";
        case Strategy::RandomInsertion: return "random-insertion";
        case Strategy::Net2Deeper: return "net2deeper";
        case Strategy::ForwardThinking: return "forward-thinking";
        case Strategy::Fixed: return "fixed";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    const std::string s = lower(name);
    for (Strategy k : {Strategy::Semi, Strategy::Auto, Strategy::RandomInsertion, Strategy::Net2Deeper,
                       Strategy::ForwardThinking, Strategy::Fixed})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxIterations: return "max-iterations";
        case StopReason::ValidationWorsened: return "validation-worsened";
        case StopReason::BelowThreshold: return "below-threshold";
    }
    return "?";
}

void RunLog::write_csv(std::ostream& out) const {
    out << "epoch,growth_iteration,train_loss,val_loss,hidden_layers,param_count\n";
    for (const auto& r : epochs)
        out << r.epoch << ',' << r.growth_iteration << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ','
            << r.hidden_layers << ',' << r.param_count << '\n';
}

void RunLog::write_growth_csv(std::ostream& out) const {
    auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? fmt(*v) : std::string(); };
    out << "iteration,layer_count,train_loss,test_loss,theoretical_dJ,numerical_dJ\n";
    for (const auto& e : events)
        out << e.iteration << ',' << e.layers_before << ',' << fmt(e.loss_before) << ',' << opt(e.test_loss_before)
            << ',' << opt(e.predicted_ratio) << ',' << opt(e.numerical_ratio) << '\n';
}

std::string event_to_json(const GrowthEvent& e) {
    nlohmann::ordered_json j;
    auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
        if (v && std::isfinite(*v)) return *v;
        return nullptr;
    };
    j["iteration"] = e.iteration;
    j["strategy"] = e.strategy;
    j["inserted_at"] = e.interface;
    j["eps_final"] = e.eps_final;
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (const auto& [l, s] : e.scores) scores.push_back({{"l", l}, {"score", s}});
    j["scores"] = std::move(scores);
    if (e.width > 0) j["m"] = e.width;
    else j["m"] = nullptr;
    j["loss_before"] = e.loss_before;
    j["loss_after"] = e.loss_after;
    j["lambda"] = opt(e.lambda);
    j["predicted_ratio"] = opt(e.predicted_ratio);
    j["numerical_ratio"] = opt(e.numerical_ratio);
    j["line_search_capped"] = e.line_search_capped;
    if (e.wall_ms) j["wall_ms"] = *e.wall_ms;
    return j.dump();
}

void RunLog::write_events(std::ostream& out) const {
    for (const auto& e : events) out << event_to_json(e) << '\n';
}

Network initial_network(const TrainConfig& cfg, std::size_t input_dim, std::size_t output_dim) {
    cfg.validate();
    if (cfg.init_layers < 1)
        throw std::invalid_argument("config: init_layers must be >= 1 for the fully-connected network");
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    spec.width = cfg.n;
    spec.hidden_count = cfg.init_layers - 1;
    spec.activation = make_admissible(cfg.activation_pair);
    spec.input_sparsity = cfg.sparsity;
    spec.loss = cfg.loss;
    Rng rng = Rng(cfg.seed).fork(1);
    return Network(spec, rng, cfg.sigma_n);
}

RbfChain initial_rbf(const TrainConfig& cfg, double center) {
    cfg.validate();
    RbfChain shape;
    shape.center = center;
    shape.validate();
    shape.layers.resize(cfg.init_layers);
    Rng rng = Rng(cfg.seed).fork(1);
    return model_fresh(shape, rng, cfg.sigma_n);
}

namespace {

void check_splits(const DataSplits& d, std::size_t n0, std::size_t nT) {
    for (const Dataset* ds : {&d.train, &d.validation}) {
        if (ds->size() == 0) throw std::invalid_argument("dataset '" + ds->name + "' is empty");
        if (ds->input_dim() != n0 || ds->output_dim() != nT)
            throw std::invalid_argument("dataset '" + ds->name + "' does not match the model dimensions");
    }
    if (d.test.size() > 0 && (d.test.input_dim() != n0 || d.test.output_dim() != nT))
        throw std::invalid_argument("dataset '" + d.test.name + "' does not match the model dimensions");
}

template <GrowableModel M>
GrowthResult<M> dispatch(Strategy s, const M& initial, const DataSplits& d, const TrainConfig& cfg) {
    if (s != Strategy::Fixed) return grow(s, initial, d, cfg);
    M shape = initial;
    const auto [lo, hi] = model_interfaces(shape);
    (void)lo;
    Rng unused(0);
    for (std::size_t i = 0; i < cfg.max_iters; ++i) shape = model_noisy_insert(shape, hi, unused, 0.0);
    return train_fixed(shape, cfg.max_iters + 1, d, cfg);
}

}  // namespace

GrowthResult<Network> grow_semi(const TrainConfig& cfg, const DataSplits& d) {
    check_splits(d, d.train.input_dim(), d.train.output_dim());
    return grow(Strategy::Semi, initial_network(cfg, d.train.input_dim(), d.train.output_dim()), d, cfg);
}

GrowthResult<Network> grow_auto(const TrainConfig& cfg, const DataSplits& d) {
    check_splits(d, d.train.input_dim(), d.train.output_dim());
    return grow(Strategy::Auto, initial_network(cfg, d.train.input_dim(), d.train.output_dim()), d, cfg);
}

GrowthResult<Network> grow_baseline(std::string_view strategy, const TrainConfig& cfg, const DataSplits& d) {
    const Strategy s = parse_strategy(strategy);
    if (s == Strategy::Semi || s == Strategy::Auto)
        throw std::invalid_argument("'" + std::string(strategy) + "' is not a baseline strategy");
    check_splits(d, d.train.input_dim(), d.train.output_dim());
    return dispatch(s, initial_network(cfg, d.train.input_dim(), d.train.output_dim()), d, cfg);
}

GrowthResult<RbfChain> grow_rbf(std::string_view strategy, const TrainConfig& cfg, const DataSplits& d,
                                double center) {
    const Strategy s = parse_strategy(strategy);
    check_splits(d, 1, 1);
    return dispatch(s, initial_rbf(cfg, center), d, cfg);
}

}  // namespace grownet
