#include "grownet/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "grownet/gradcheck.hpp"
#include "json.hpp"

namespace grownet::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

/// Counts the x* and y* columns of a CSV header.
std::pair<std::size_t, std::size_t> header_dims(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("missing header", 1);
    std::size_t nx = 0, ny = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        if (!cell.empty() && cell.front() == 'x') ++nx;
        else if (!cell.empty() && cell.front() == 'y') ++ny;
    }
    return {nx, ny};
}

fs::path output_dir(const RunConfig& cfg) {
    if (!cfg.out.empty()) return cfg.out;
    if (const char* env = std::getenv("GROWNET_OUT"); env && *env) return env;
    return "grownet_out";
}

DataSplits load_fnn_data(const RunConfig& cfg) {
    DataSplits d;
    if (cfg.data_train.empty()) {
        if (!cfg.data_val.empty() || !cfg.data_test.empty())
            throw ConfigError("data-val/data-test given without data-train");
        TeacherOptions teacher;
        teacher.noise = cfg.gen_noise;
        const std::size_t total = cfg.gen_train + cfg.gen_val + cfg.gen_test;
        const Dataset all = gen_gaussian_regression(cfg.data_seed, total, cfg.gen_inputs, cfg.gen_outputs, teacher);
        d.train = all.slice(0, cfg.gen_train);
        d.validation = all.slice(cfg.gen_train, cfg.gen_train + cfg.gen_val);
        d.test = all.slice(cfg.gen_train + cfg.gen_val, total);
        d.train.name = "train";
        d.validation.name = "validation";
        d.test.name = "test";
        return d;
    }
    if (cfg.data_val.empty()) throw ConfigError("data-train needs data-val");
    auto [n0, nT] = header_dims(cfg.data_train);
    if (cfg.inputs) n0 = cfg.inputs;
    if (cfg.outputs) nT = cfg.outputs;
    d.train = load_csv(cfg.data_train, n0, nT);
    d.validation = load_csv(cfg.data_val, n0, nT);
    if (!cfg.data_test.empty()) d.test = load_csv(cfg.data_test, n0, nT);
    if (cfg.standardize) {
        std::vector<Dataset> others{d.validation};
        if (d.test.size() > 0) others.push_back(d.test);
        StandardizeResult r = standardize(d.train, others);
        for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
        d.train = std::move(r.train);
        d.validation = std::move(r.others[0]);
        if (r.others.size() > 1) d.test = std::move(r.others[1]);
    }
    return d;
}

DataSplits load_rbf_data(const RunConfig& cfg) {
    if (cfg.data_train.empty())
        return gen_rbf_dataset(cfg.data_seed, cfg.rbf_train, cfg.rbf_val, cfg.rbf_test, cfg.rbf_depth, cfg.center)
            .splits;
    if (cfg.data_val.empty()) throw ConfigError("data-train needs data-val");
    DataSplits d;
    d.train = load_csv(cfg.data_train, 1, 1);
    d.validation = load_csv(cfg.data_val, 1, 1);
    if (!cfg.data_test.empty()) d.test = load_csv(cfg.data_test, 1, 1);
    return d;
}

template <GrowableModel M>
json losses(const M& model, const DataSplits& d) {
    json j;
    j["train_loss"] = model_loss(model, d.train);
    j["val_loss"] = model_loss(model, d.validation);
    if (d.test.size() > 0) {
        j["test_loss"] = model_loss(model, d.test);
        j["test_mse"] = model_mse(model, d.test);
    } else {
        j["test_loss"] = nullptr;
        j["test_mse"] = nullptr;
    }
    return j;
}

void write_checkpoint(const Network& net, const fs::path& path) { save_checkpoint(net, path); }
void write_checkpoint(const RbfChain& chain, const fs::path& path) { save_rbf_checkpoint(chain, path); }

template <GrowableModel M>
json write_run(const RunConfig& cfg, const GrowthResult<M>& res, const DataSplits& d, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ostringstream csv;
        res.log.write_csv(csv);
        write_file(dir / "run_log.csv", csv.str());
        std::ostringstream ev;
        res.log.write_events(ev);
        write_file(dir / "events.jsonl", ev.str());
        if (cfg.model == "rbf") {
            std::ostringstream g;
            res.log.write_growth_csv(g);
            write_file(dir / "rbf_demo.csv", g.str());
        }
    }
    write_checkpoint(res.best, dir / "checkpoint.txt");
    write_checkpoint(res.last, dir / "checkpoint_last.txt");

    json s;
    s["command"] = cfg.command;
    s["model"] = cfg.model;
    s["strategy"] = cfg.command == "baseline" ? cfg.strategy : cfg.mode;
    s["stop_reason"] = std::string(to_string(res.log.stop));
    s["hidden_layers"] = model_depth(res.best);
    s["param_count"] = model_param_count(res.best);
    s["insertions"] = res.log.events.size();
    s["best_stage"] = res.log.best_stage;
    const json best = losses(res.best, d);
    for (const auto& [k, v] : best.items()) s[k] = v;
    json last = losses(res.last, d);
    last["hidden_layers"] = model_depth(res.last);
    s["last_stage"] = std::move(last);
    s["stage_best_val"] = res.log.stage_best_val;
    json c;
    for (const auto& [k, v] : effective_config(cfg)) c[k] = v;
    s["config"] = std::move(c);
    write_file(dir / "summary.json", s.dump(2) + "\n");
    return s;
}

json run_growth(const RunConfig& cfg, const fs::path& dir) {
    const bool baseline = cfg.command == "baseline";
    const std::string strategy = baseline ? cfg.strategy : cfg.mode;
    const Strategy s = parse_strategy(strategy);
    if (baseline && (s == Strategy::Semi || s == Strategy::Auto))
        throw ConfigError("baseline strategy must be random-insertion, net2deeper, forward-thinking or fixed");
    if (!baseline && s != Strategy::Semi && s != Strategy::Auto)
        throw ConfigError("grow mode must be semi or auto");
    if (cfg.model == "rbf") {
        const DataSplits d = load_rbf_data(cfg);
        return write_run(cfg, grow_rbf(strategy, cfg.train, d, cfg.center), d, dir);
    }
    if (cfg.model != "fnn") throw ConfigError("model must be fnn or rbf");
    const DataSplits d = load_fnn_data(cfg);
    if (s == Strategy::Semi) return write_run(cfg, grow_semi(cfg.train, d), d, dir);
    if (s == Strategy::Auto) return write_run(cfg, grow_auto(cfg.train, d), d, dir);
    return write_run(cfg, grow_baseline(strategy, cfg.train, d), d, dir);
}

bool is_rbf_checkpoint(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string word;
    in >> word;
    return word == "grownet-rbf";
}

Dataset report_data(const RunConfig& cfg, std::size_t n0, std::size_t nT) {
    const std::string path = cfg.data.empty() ? cfg.data_train : cfg.data;
    if (path.empty()) throw ConfigError("report needs --data");
    return load_csv(path, n0, nT);
}

int run_report(const RunConfig& cfg, bool rank) {
    if (cfg.checkpoint.empty()) throw ConfigError(cfg.command + " needs --checkpoint");
    const WidthRule rule = cfg.mode == "auto" ? WidthRule::automatic(cfg.train.eps_s) : WidthRule::fixed(cfg.train.m);
    std::string text;
    if (is_rbf_checkpoint(cfg.checkpoint)) {
        const RbfChain chain = load_rbf_checkpoint(fs::path(cfg.checkpoint));
        const Dataset d = report_data(cfg, 1, 1);
        if (rank) throw ConfigError("transfer-rank needs a fully-connected checkpoint");
        text = report_to_json(rbf_scan(chain, d));
    } else {
        const Network net = load_checkpoint(fs::path(cfg.checkpoint));
        const Dataset d = report_data(cfg, net.spec().input_dim, net.spec().output_dim);
        if (rank) {
            json arr = json::array();
            for (const auto& r : transfer_rank(net, d)) arr.push_back({{"l", r.interface}, {"lambda", r.lambda}});
            text = arr.dump();
        } else {
            text = report_to_json(scan(net, d, rule));
        }
    }
    std::cout << text << '\n';
    if (!cfg.out.empty()) {
        fs::create_directories(cfg.out);
        write_file(fs::path(cfg.out) / (rank ? "transfer_rank.json" : "report.json"), text + "\n");
    }
    return kOk;
}

int run_gradcheck(const RunConfig& cfg) {
    const GradCheckSweep r = gradcheck_sweep(cfg.train.seed, cfg.gradcheck_nets);
    std::cout << "max relative gradient error " << r.max_rel_error << " over " << r.networks << " networks\n";
    return r.max_rel_error <= 1e-6 ? kOk : kCheckFailed;
}

int execute(const RunConfig& cfg, const fs::path& dir, json* summary) {
    if (cfg.command == "gradcheck") return run_gradcheck(cfg);
    if (cfg.command == "report") return run_report(cfg, false);
    if (cfg.command == "transfer-rank") return run_report(cfg, true);
    json s = run_growth(cfg, dir);
    if (summary) *summary = s;
    else std::cout << s.dump(2) << '\n';
    return kOk;
}

template <typename F>
int guarded(F&& f, std::ostream& err) {
    try {
        return f();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        err << "io error: " << e.what() << '\n';
        return kIoError;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kNumericError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericError;
    }
}

std::pair<std::uint64_t, std::uint64_t> parse_sweep(const std::string& spec) {
    const std::string prefix = "seeds=";
    const auto dots = spec.find("..");
    if (spec.rfind(prefix, 0) != 0 || dots == std::string::npos)
        throw ConfigError("sweep must look like seeds=a..b");
    try {
        const auto a = std::stoull(spec.substr(prefix.size(), dots - prefix.size()));
        const auto b = std::stoull(spec.substr(dots + 2));
        if (b < a) throw ConfigError("sweep range is empty");
        return {a, b};
    } catch (const std::logic_error&) {
        throw ConfigError("sweep must look like seeds=a..b");
    }
}

int run_sweep(const RunConfig& base, const fs::path& root) {
    if (base.command != "grow" && base.command != "baseline" && base.command != "rbf-demo")
        throw ConfigError("--sweep applies to grow, baseline and rbf-demo");
    const auto [a, b] = parse_sweep(base.sweep);
    const std::size_t count = static_cast<std::size_t>(b - a + 1);
    std::vector<int> codes(count, kOk);
    std::vector<json> summaries(count);
    std::vector<std::string> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < count;) {
            RunConfig cfg = base;
            cfg.train.seed = a + k;
            const fs::path dir = root / ("seed_" + std::to_string(a + k));
            std::ostringstream err;
            codes[k] = guarded([&] { return execute(cfg, dir, &summaries[k]); }, err);
            errors[k] = err.str();
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    json out;
    out["seeds"] = json::array();
    std::vector<double> mses;
    int worst = kOk;
    for (std::size_t k = 0; k < count; ++k) {
        std::cerr << errors[k];
        worst = std::max(worst, codes[k]);
        json e;
        e["seed"] = a + k;
        e["exit_code"] = codes[k];
        if (codes[k] == kOk) {
            e["test_mse"] = summaries[k]["test_mse"];
            e["hidden_layers"] = summaries[k]["hidden_layers"];
            if (summaries[k]["test_mse"].is_number()) mses.push_back(summaries[k]["test_mse"].get<double>());
        }
        out["seeds"].push_back(std::move(e));
    }
    if (!mses.empty()) {
        std::sort(mses.begin(), mses.end());
        const std::size_t h = mses.size() / 2;
        out["median_test_mse"] = mses.size() % 2 ? mses[h] : 0.5 * (mses[h - 1] + mses[h]);
    }
    fs::create_directories(root);
    write_file(root / "sweep_summary.json", out.dump(2) + "\n");
    std::cout << out.dump(2) << '\n';
    return worst;
}

const std::vector<std::string> kCommands = {"grow", "baseline", "rbf-demo", "report", "transfer-rank", "gradcheck"};

int run_impl(const std::vector<std::string>& args) {
    CLI::App app{"Growing residual networks guided by the topological derivative", "grownet"};
    app.set_version_flag("--version", "grownet 1.0");
    std::string command;
    std::string config_path;
    app.add_option("command", command, "grow | baseline | rbf-demo | report | transfer-rank | gradcheck")
        ->required()
        ->check(CLI::IsMember(kCommands));
    app.add_option("--config", config_path, "key = value config file");
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
    for (const auto& key : known_keys()) options[key] = app.add_option("--" + key, flags[key], key_help(key));

    std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv.begin(), argv.end());
    try {
        app.parse(argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    RunConfig cfg;
    cfg.command = command;
    if (command == "rbf-demo") apply_rbf_preset(cfg);
    if (!config_path.empty()) apply_config_text(cfg, read_file(config_path));
    for (const auto& key : known_keys())
        if (options[key]->count() > 0) set_key(cfg, key, flags[key]);
    if (cfg.mode.rfind("baseline:", 0) == 0) {
        cfg.strategy = cfg.mode.substr(9);
        cfg.mode = "semi";
        if (cfg.command == "grow") cfg.command = "baseline";
    }
    if (cfg.command == "rbf-demo") {
        cfg.model = "rbf";
        if (cfg.mode != "semi" && cfg.mode != "auto") {
            cfg.strategy = cfg.mode;
            cfg.command = "baseline";
        }
    }
    cfg.train.validate();
    for (const auto* p : {&cfg.data_train, &cfg.data_val, &cfg.data_test, &cfg.data, &cfg.checkpoint})
        if (!p->empty() && !fs::exists(*p)) throw IoError("no such file: " + *p);

    const fs::path dir = output_dir(cfg);
    if (!cfg.sweep.empty()) return run_sweep(cfg, dir);
    return execute(cfg, dir, nullptr);
}

}  // namespace

int run(const std::vector<std::string>& args) {
    return guarded([&] { return run_impl(args); }, std::cerr);
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args);
}

}  // namespace grownet::cli
