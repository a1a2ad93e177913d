#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "grownet/cli.hpp"

namespace grownet::cli {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string normalize_key(std::string_view key) {
    std::string k = trim(key);
    while (!k.empty() && k.front() == '-') k.erase(k.begin());
    for (char& c : k) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (c == '_') c = '-';
    }
    return k;
}

std::size_t to_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw ConfigError(std::string(key) + ": expected an unsigned integer, got '" + std::string(v) + "'");
    return out;
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end || !std::isfinite(out))
        throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    std::string s(v);
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Field {
    const char* name;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;  // empty: not echoed
};

#define SIZE_FIELD(key, member)                                                                  \
    Field {                                                                                      \
        key, [](RunConfig& c, std::string_view k, std::string_view v) { c.member = to_size(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                          \
    }
#define DOUBLE_FIELD(key, member)                                                                  \
    Field {                                                                                        \
        key, [](RunConfig& c, std::string_view k, std::string_view v) { c.member = to_double(k, v); }, \
            [](const RunConfig& c) { return num(c.member); }                                       \
    }
#define STRING_FIELD(key, member)                                                                \
    Field {                                                                                      \
        key, [](RunConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); }, \
            [](const RunConfig& c) { return c.member; }                                          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        STRING_FIELD("mode", mode),
        STRING_FIELD("strategy", strategy),
        STRING_FIELD("model", model),
        Field{"seed", [](RunConfig& c, std::string_view k, std::string_view v) { c.train.seed = to_u64(k, v); },
              [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        Field{"out", [](RunConfig& c, std::string_view, std::string_view v) { c.out = std::string(v); }, nullptr},
        Field{"sweep", [](RunConfig& c, std::string_view, std::string_view v) { c.sweep = std::string(v); }, nullptr},
        STRING_FIELD("data-train", data_train),
        STRING_FIELD("data-val", data_val),
        STRING_FIELD("data-test", data_test),
        STRING_FIELD("data", data),
        STRING_FIELD("checkpoint", checkpoint),
        SIZE_FIELD("inputs", inputs),
        SIZE_FIELD("outputs", outputs),
        Field{"standardize",
              [](RunConfig& c, std::string_view k, std::string_view v) { c.standardize = to_bool(k, v); },
              [](const RunConfig& c) { return std::string(c.standardize ? "true" : "false"); }},
        SIZE_FIELD("n", train.n),
        SIZE_FIELD("m", train.m),
        SIZE_FIELD("max-iters", train.max_iters),
        SIZE_FIELD("init-layers", train.init_layers),
        DOUBLE_FIELD("sparsity", train.sparsity),
        SIZE_FIELD("epochs-base", train.epochs_base),
        SIZE_FIELD("epochs-step", train.epochs_step),
        SIZE_FIELD("batch", train.batch),
        DOUBLE_FIELD("lr", train.lr),
        DOUBLE_FIELD("eps", train.eps),
        DOUBLE_FIELD("eps-threshold", train.eps_threshold),
        DOUBLE_FIELD("tau1", train.tau1),
        DOUBLE_FIELD("eps-s", train.eps_s),
        SIZE_FIELD("patience", train.patience),
        DOUBLE_FIELD("sigma-n", train.sigma_n),
        STRING_FIELD("activation-pair", train.activation_pair),
        Field{"optimizer",
              [](RunConfig& c, std::string_view, std::string_view v) { c.train.optimizer = parse_optimizer(v); },
              [](const RunConfig& c) { return std::string(to_string(c.train.optimizer)); }},
        Field{"loss", [](RunConfig& c, std::string_view, std::string_view v) { c.train.loss = parse_loss_kind(v); },
              [](const RunConfig& c) { return std::string(to_string(c.train.loss)); }},
        SIZE_FIELD("max-stage-epochs", train.max_stage_epochs),
        SIZE_FIELD("line-search-cap", train.line_search_cap),
        DOUBLE_FIELD("probe-eps", train.probe_eps),
        Field{"record-timing",
              [](RunConfig& c, std::string_view k, std::string_view v) { c.train.record_timing = to_bool(k, v); },
              [](const RunConfig& c) { return std::string(c.train.record_timing ? "true" : "false"); }},
        SIZE_FIELD("gen-train", gen_train),
        SIZE_FIELD("gen-val", gen_val),
        SIZE_FIELD("gen-test", gen_test),
        SIZE_FIELD("gen-inputs", gen_inputs),
        SIZE_FIELD("gen-outputs", gen_outputs),
        DOUBLE_FIELD("gen-noise", gen_noise),
        DOUBLE_FIELD("center", center),
        SIZE_FIELD("rbf-depth", rbf_depth),
        SIZE_FIELD("rbf-train", rbf_train),
        SIZE_FIELD("rbf-val", rbf_val),
        SIZE_FIELD("rbf-test", rbf_test),
        Field{"data-seed", [](RunConfig& c, std::string_view k, std::string_view v) { c.data_seed = to_u64(k, v); },
              [](const RunConfig& c) { return std::to_string(c.data_seed); }},
        SIZE_FIELD("gradcheck-nets", gradcheck_nets),
    };
    return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

}  // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.name);
    return out;
}

std::string key_help(std::string_view key) {
    static const std::map<std::string, std::string, std::less<>> help = {
        {"mode", "semi | auto | baseline:<strategy>"},
        {"strategy", "baseline: random-insertion | net2deeper | forward-thinking | fixed"},
        {"model", "fnn | rbf"},
        {"seed", "model seed (init, shuffling, insertion)"},
        {"out", "output directory (default $GROWNET_OUT or ./grownet_out)"},
        {"sweep", "seeds=a..b, one run per seed"},
        {"data-train", "training CSV"},
        {"data-val", "validation CSV"},
        {"data-test", "test CSV"},
        {"data", "CSV for report / transfer-rank"},
        {"checkpoint", "checkpoint for report / transfer-rank"},
        {"inputs", "input columns (0: from header)"},
        {"outputs", "output columns (0: from header)"},
        {"standardize", "standardize inputs with training statistics"},
        {"n", "hidden width"},
        {"m", "neurons activated per insertion (semi mode)"},
        {"max-iters", "maximum insertions (N_n)"},
        {"init-layers", "initial hidden layers, input map included (T_b)"},
        {"sparsity", "fraction of masked input weights (i_s)"},
        {"epochs-base", "epochs of the first stage (E_e)"},
        {"epochs-step", "extra epochs per stage (kappa_e)"},
        {"batch", "minibatch size"},
        {"lr", "learning rate"},
        {"eps", "initial insertion scale"},
        {"eps-threshold", "stop when the best score falls below this (eps^t)"},
        {"tau1", "line-search step"},
        {"eps-s", "auto-width tolerance"},
        {"patience", "auto mode: epochs without improvement per stage (N_k)"},
        {"sigma-n", "noise std of net2deeper / forward-thinking layers"},
        {"activation-pair", "swish+tanh | mish+tanh | swish+mish"},
        {"optimizer", "adam | sgd"},
        {"loss", "mse | cross-entropy"},
        {"max-stage-epochs", "auto mode: epoch cap per stage"},
        {"line-search-cap", "maximum line-search steps"},
        {"probe-eps", "scale of the logged numerical derivative"},
        {"record-timing", "log wall_ms per event"},
        {"gen-train", "synthetic regression: training samples"},
        {"gen-val", "synthetic regression: validation samples"},
        {"gen-test", "synthetic regression: test samples"},
        {"gen-inputs", "synthetic regression: inputs"},
        {"gen-outputs", "synthetic regression: outputs"},
        {"gen-noise", "synthetic regression: label noise std"},
        {"center", "rbf center c"},
        {"rbf-depth", "layers of the rbf truth chain"},
        {"rbf-train", "rbf training samples"},
        {"rbf-val", "rbf validation samples"},
        {"rbf-test", "rbf test samples"},
        {"data-seed", "seed of the synthetic data"},
        {"gradcheck-nets", "random networks checked by gradcheck"},
    };
    const auto it = help.find(normalize_key(key));
    return it == help.end() ? std::string() : it->second;
}

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
    const std::string k = normalize_key(key);
    const std::string v = trim(value);
    for (const auto& f : fields()) {
        if (k != f.name) continue;
        try {
            f.set(cfg, k, v);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(k + ": " + e.what());
        }
        return;
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        try {
            set_key(cfg, t.substr(0, eq), t.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::map<std::string, std::string> effective_config(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& f : fields())
        if (f.get) out[f.name] = f.get(cfg);
    return out;
}

void apply_rbf_preset(RunConfig& cfg) {
    cfg.model = "rbf";
    cfg.train.init_layers = 1;
    cfg.train.max_iters = 10;
    cfg.train.epochs_base = 500;
    cfg.train.epochs_step = 0;
    cfg.train.batch = 500;
    cfg.train.lr = 1e-2;
    cfg.train.eps = 1e-3;
    cfg.train.tau1 = 1e-3;
    cfg.train.eps_threshold = 1e-8;
    cfg.train.sigma_n = 0.01;
    cfg.train.n = 1;
    cfg.train.m = 1;
}

}  // namespace grownet::cli
