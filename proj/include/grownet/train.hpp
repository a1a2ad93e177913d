#pragma once

// Optimizers, the backtracking line search on the insertion scale, and the
// growth loops: topology-guided (fixed width or automatic width) and the
// comparison strategies. The loops are templates over GrowableModel so the
// same code drives the residual Network and the scalar RbfChain.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grownet/model.hpp"

namespace grownet {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
    std::size_t n = 10;             // hidden width
    std::size_t m = 5;              // neurons activated per insertion
    std::size_t max_iters = 7;      // N_n
    std::size_t init_layers = 2;    // T_b, the input map counts as one
    double sparsity = 0.0;          // i_s, fraction of input weights removed
    std::size_t epochs_base = 2000; // E_e
    std::size_t epochs_step = 1000; // kappa_e
    std::size_t batch = 1000;       // b_s
    double lr = 1e-3;
    double eps = 1e-3;
    double eps_threshold = 1e-2;    // epsilon^t
    double tau1 = 1e-3;
    double eps_s = 0.5;
    std::size_t patience = 100;     // N_k
    double sigma_n = 0.01;          // init and net2deeper noise std
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::string activation_pair = "swish+tanh";
    LossKind loss = LossKind::MeanSquared;

    std::size_t max_stage_epochs = 100000;  // hard cap for patience-driven stages
    std::size_t line_search_cap = 10000;
    double probe_eps = 1e-4;        // eps of the numerical derivative logged per event
    bool record_timing = false;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// E(i) = E_e + kappa_e (i - 1), i >= 1.
std::size_t scheduled_epochs(const TrainConfig& cfg, std::size_t iteration);

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void reset();
    /// Updates entries with mask[i] != 0; grads follow the descent convention.
    void step(std::span<double> params, std::span<const double> grads, std::span<const unsigned char> mask);
    std::size_t steps() const noexcept { return t_; }

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

struct LineSearchResult {
    double eps = 0.0;
    double loss = 0.0;          // J(eps Phi)
    std::size_t steps = 0;
    bool capped = false;
};

template <GrowableModel M>
LineSearchResult line_search(const M& model, const Dataset& train, std::size_t interface,
                             std::span<const double> phi, double eps0, double tau1,
                             std::size_t cap = 10000) {
    LineSearchResult r;
    r.eps = eps0;
    r.loss = model_loss(model_insert(model, interface, phi, eps0), train);
    while (true) {
        if (r.steps >= cap) {
            r.capped = true;
            break;
        }
        const double next = model_loss(model_insert(model, interface, phi, r.eps + tau1), train);
        if (!(next <= r.loss)) break;
        r.eps += tau1;
        r.loss = next;
        ++r.steps;
    }
    return r;
}

enum class Strategy { Semi, Auto, RandomInsertion, Net2Deeper, ForwardThinking, Fixed };

std::string_view to_string(Strategy s);
/// semi | auto | random-insertion | net2deeper | forward-thinking | fixed
Strategy parse_strategy(std::string_view name);

enum class StopReason { MaxIterations, ValidationWorsened, BelowThreshold };

std::string_view to_string(StopReason r);

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t growth_iteration = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::size_t hidden_layers = 0;
    std::size_t param_count = 0;
};

struct GrowthEvent {
    std::size_t iteration = 0;
    std::string strategy;
    std::size_t interface = 0;
    double eps_final = 0.0;
    std::vector<std::pair<std::size_t, double>> scores;  // per interface; empty for blind strategies
    std::size_t width = 0;
    std::size_t layers_before = 0;
    double loss_before = 0.0;
    std::optional<double> test_loss_before;
    double loss_after = 0.0;
    std::optional<double> lambda;           // Lambda at the chosen interface
    std::optional<double> predicted_ratio;  // Phi^T Q Phi = lambda / width
    std::optional<double> numerical_ratio;  // (J0 - J(probe_eps Phi)) / probe_eps^2
    bool line_search_capped = false;
    std::optional<double> wall_ms;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    std::vector<GrowthEvent> events;
    std::vector<double> stage_best_val;  // best validation loss of each stage
    StopReason stop = StopReason::MaxIterations;
    std::size_t best_stage = 1;          // 1-based

    void write_csv(std::ostream& out) const;
    void write_events(std::ostream& out) const;
    /// iteration,layer_count,train_loss,test_loss,theoretical_dJ,numerical_dJ
    /// per insertion, losses taken before it; missing values are empty.
    void write_growth_csv(std::ostream& out) const;
};

std::string event_to_json(const GrowthEvent& e);

template <GrowableModel M>
struct GrowthResult {
    M best;             // lowest validation loss over all stages
    M last;             // network of the last completed stage
    RunLog log;
    double best_val = 0.0;
    double last_val = 0.0;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<std::size_t> batch_order(std::size_t samples, Rng& rng) {
    std::vector<std::size_t> idx(samples);
    for (std::size_t i = 0; i < samples; ++i) idx[i] = i;
    rng.shuffle(idx);
    return idx;
}

template <GrowableModel M>
void run_epoch(M& model, const Dataset& train, const TrainConfig& cfg, Optimizer& opt, Rng& rng) {
    const std::vector<unsigned char> mask = model_trainable(model);
    std::vector<double> params = model_parameters(model);
    const std::size_t S = train.size();
    if (S <= cfg.batch) {
        const std::vector<double> g = model_gradient(model, train, nullptr);
        opt.step(params, g, mask);
        model_set_parameters(model, params);
        return;
    }
    const std::vector<std::size_t> order = batch_order(S, rng);
    for (std::size_t b = 0; b < S; b += cfg.batch) {
        const std::size_t e = std::min(S, b + cfg.batch);
        const Dataset batch = train.select(std::span<const std::size_t>(order).subspan(b, e - b));
        const std::vector<double> g = model_gradient(model, batch, nullptr);
        opt.step(params, g, mask);
        model_set_parameters(model, params);
    }
}

/// Trains one stage and leaves `model` at its best-validation parameters
/// (the starting parameters count as a candidate). With `epochs` empty the
/// stage ends after cfg.patience epochs without a new best.
template <GrowableModel M>
double train_stage(M& model, const DataSplits& d, const TrainConfig& cfg, std::size_t iteration,
                   std::optional<std::size_t> epochs, Rng& rng, RunLog& log, std::size_t& epoch_counter) {
    Optimizer opt(cfg.optimizer, cfg.lr);
    double best = model_loss(model, d.validation);
    std::vector<double> best_params = model_parameters(model);
    std::size_t since_best = 0;
    for (std::size_t e = 0;; ++e) {
        if (epochs) {
            if (e >= *epochs) break;
        } else if (since_best >= cfg.patience || e >= cfg.max_stage_epochs) {
            break;
        }
        run_epoch(model, d.train, cfg, opt, rng);
        EpochRecord rec;
        rec.epoch = ++epoch_counter;
        rec.growth_iteration = iteration;
        rec.train_loss = model_loss(model, d.train);
        rec.val_loss = model_loss(model, d.validation);
        rec.hidden_layers = model_depth(model);
        rec.param_count = model_param_count(model);
        log.epochs.push_back(rec);
        if (rec.val_loss < best) {
            best = rec.val_loss;
            best_params = model_parameters(model);
            since_best = 0;
        } else {
            ++since_best;
        }
    }
    model_set_parameters(model, best_params);
    log.stage_best_val.push_back(best);
    return best;
}

}  // namespace detail

/// Growth loop. Stage 1 trains the initial model; every later stage first
/// inserts one layer according to `strategy` and then trains. The loop stops
/// at the first of: max_iters insertions, a stage whose best validation loss
/// is worse than the previous stage's, or (topology-guided strategies only)
/// a best score below eps_threshold.
template <GrowableModel M>
GrowthResult<M> grow(Strategy strategy, M initial, const DataSplits& d, const TrainConfig& cfg) {
    cfg.validate();
    if (strategy == Strategy::Fixed)
        throw std::invalid_argument("grow: the fixed baseline has no growth loop, use train_fixed");
    Rng root(cfg.seed);
    Rng shuffle_rng = root.fork(2);
    Rng insert_rng = root.fork(3);
    const bool guided = strategy == Strategy::Semi || strategy == Strategy::Auto;
    const WidthRule rule =
        strategy == Strategy::Auto ? WidthRule::automatic(cfg.eps_s) : WidthRule::fixed(cfg.m);
    auto stage_epochs = [&](std::size_t i) -> std::optional<std::size_t> {
        if (strategy == Strategy::Auto) return std::nullopt;
        return scheduled_epochs(cfg, i);
    };

    GrowthResult<M> res{initial, initial, {}, 0.0, 0.0};
    M model = std::move(initial);
    std::size_t epoch_counter = 0;
    double val = detail::train_stage(model, d, cfg, 1, stage_epochs(1), shuffle_rng, res.log, epoch_counter);
    res.best = model;
    res.best_val = val;
    double prev = std::numeric_limits<double>::infinity();

    for (std::size_t i = 1;; ++i) {
        if (i > cfg.max_iters) {
            res.log.stop = StopReason::MaxIterations;
            break;
        }
        if (val > prev) {
            res.log.stop = StopReason::ValidationWorsened;
            break;
        }
        const auto t0 = std::chrono::steady_clock::now();
        GrowthEvent ev;
        ev.iteration = i;
        ev.strategy = std::string(to_string(strategy));
        ev.layers_before = model_depth(model);
        ev.loss_before = model_loss(model, d.train);
        if (d.test.size() > 0) ev.test_loss_before = model_loss(model, d.test);
        const auto [lo, hi] = model_interfaces(model);

        if (guided) {
            const TopoReport report = model_scan(model, d.train, rule);
            for (const auto& ir : report.interfaces) ev.scores.emplace_back(ir.interface, ir.score);
            if (!report.should_insert(cfg.eps_threshold)) {
                res.log.stop = StopReason::BelowThreshold;
                break;
            }
            const InterfaceReport& ir = report.at(*report.chosen);
            const std::vector<double>& phi = ir.choice.direction;
            ev.interface = ir.interface;
            ev.width = ir.choice.width;
            ev.lambda = ir.choice.lambda;
            ev.predicted_ratio = ir.choice.lambda / static_cast<double>(ir.choice.width);
            const double probe = model_loss(model_insert(model, ev.interface, phi, cfg.probe_eps), d.train);
            ev.numerical_ratio = (ev.loss_before - probe) / (cfg.probe_eps * cfg.probe_eps);
            const LineSearchResult ls =
                line_search(model, d.train, ev.interface, phi, cfg.eps, cfg.tau1, cfg.line_search_cap);
            ev.eps_final = ls.eps;
            ev.line_search_capped = ls.capped;
            model = model_insert(model, ev.interface, phi, ls.eps);
        } else {
            ev.interface = lo + insert_rng.index(hi - lo + 1);
            if (strategy == Strategy::RandomInsertion) {
                const std::vector<double> phi = random_unit_vector(insert_rng, model_direction_dim(model));
                const LineSearchResult ls =
                    line_search(model, d.train, ev.interface, phi, cfg.eps, cfg.tau1, cfg.line_search_cap);
                ev.eps_final = ls.eps;
                ev.line_search_capped = ls.capped;
                model = model_insert(model, ev.interface, phi, ls.eps);
            } else {
                if (strategy == Strategy::ForwardThinking) {
                    ev.interface = hi;
                    model_freeze_existing(model);
                }
                ev.eps_final = cfg.sigma_n;
                model = model_noisy_insert(model, ev.interface, insert_rng, cfg.sigma_n);
            }
        }
        ev.loss_after = model_loss(model, d.train);
        if (cfg.record_timing) ev.wall_ms = detail::elapsed_ms(t0);
        res.log.events.push_back(std::move(ev));

        prev = val;
        val = detail::train_stage(model, d, cfg, i + 1, stage_epochs(i + 1), shuffle_rng, res.log, epoch_counter);
        if (val < res.best_val) {
            res.best = model;
            res.best_val = val;
            res.log.best_stage = i + 1;
        }
    }
    res.last = std::move(model);
    res.last_val = val;
    return res;
}

/// Trains `shape`'s architecture from a fresh initialization for
/// sum_{i=1}^{stages} E(i) epochs in a single stage.
template <GrowableModel M>
GrowthResult<M> train_fixed(const M& shape, std::size_t stages, const DataSplits& d, const TrainConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng init_rng = root.fork(1);
    Rng shuffle_rng = root.fork(2);
    M model = model_fresh(shape, init_rng, cfg.sigma_n);
    std::size_t total = 0;
    for (std::size_t i = 1; i <= stages; ++i) total += scheduled_epochs(cfg, i);
    GrowthResult<M> res{model, model, {}, 0.0, 0.0};
    std::size_t epoch_counter = 0;
    const double val = detail::train_stage(model, d, cfg, 1, total, shuffle_rng, res.log, epoch_counter);
    res.best = model;
    res.last = model;
    res.best_val = res.last_val = val;
    res.log.stop = StopReason::MaxIterations;
    return res;
}

/// Inserts eps * phi at `interface` and trains only that layer on new data
/// for `epochs` epochs (best validation kept); returns the tuned model.
template <GrowableModel M>
M fine_tune_inserted(const M& model, std::size_t interface, std::span<const double> phi, double eps,
                     const DataSplits& d, const TrainConfig& cfg, std::size_t epochs) {
    M tuned = model;
    model_freeze_all(tuned);
    tuned = model_insert(tuned, interface, phi, eps);
    Rng rng = Rng(cfg.seed).fork(4);
    RunLog scratch;
    std::size_t counter = 0;
    detail::train_stage(tuned, d, cfg, 1, epochs, rng, scratch, counter);
    model_unfreeze(tuned);
    return tuned;
}

// Convenience entry points for the fully-connected network ----------------

/// Network with cfg.init_layers hidden layers (input map included), width
/// cfg.n and N(0, sigma_n^2) parameters drawn from the seed.
Network initial_network(const TrainConfig& cfg, std::size_t input_dim, std::size_t output_dim);
/// Chain of cfg.init_layers layers with N(0, sigma_n^2) parameters.
RbfChain initial_rbf(const TrainConfig& cfg, double center = 0.1);

GrowthResult<Network> grow_semi(const TrainConfig& cfg, const DataSplits& d);
GrowthResult<Network> grow_auto(const TrainConfig& cfg, const DataSplits& d);
/// random-insertion | net2deeper | forward-thinking | fixed. The fixed
/// baseline trains a network with init_layers + max_iters hidden layers.
GrowthResult<Network> grow_baseline(std::string_view strategy, const TrainConfig& cfg, const DataSplits& d);

/// Same for the RBF chain; `strategy` also accepts semi and auto.
GrowthResult<RbfChain> grow_rbf(std::string_view strategy, const TrainConfig& cfg, const DataSplits& d,
                                double center = 0.1);

}  // namespace grownet
