#include <cmath>
#include <sstream>

#include "doctest.h"
#include "grownet/model.hpp"
#include "grownet/train.hpp"
#include "json.hpp"

using namespace grownet;

namespace {

DataSplits regression(std::uint64_t seed, std::size_t n0 = 3, std::size_t nT = 1) {
    const Dataset all = gen_gaussian_regression(seed, 160, n0, nT);
    return {all.slice(0, 100), all.slice(100, 130), all.slice(130, 160)};
}

TrainConfig small_config() {
    TrainConfig c;
    c.n = 4;
    c.m = 2;
    c.max_iters = 3;
    c.init_layers = 2;
    c.epochs_base = 30;
    c.epochs_step = 10;
    c.batch = 32;
    c.lr = 1e-2;
    c.eps_threshold = 0.0;
    c.sigma_n = 0.1;
    c.seed = 5;
    return c;
}

std::string csv(const RunLog& log) {
    std::ostringstream s;
    log.write_csv(s);
    log.write_events(s);
    return s.str();
}

}  // namespace

TEST_SUITE("train") {
    TEST_CASE("epoch schedule grows linearly") {
        TrainConfig c;
        CHECK(scheduled_epochs(c, 1) == 2000);
        CHECK(scheduled_epochs(c, 2) == 3000);
        CHECK(scheduled_epochs(c, 8) == 9000);
        CHECK_THROWS_AS(scheduled_epochs(c, 0), std::invalid_argument);
    }

    TEST_CASE("config validation names the field") {
        TrainConfig c;
        c.validate();
        auto rejects = [](auto mutate, const char* field) {
            TrainConfig bad;
            mutate(bad);
            try {
                bad.validate();
                return false;
            } catch (const std::invalid_argument& e) {
                return std::string(e.what()).find(field) != std::string::npos;
            }
        };
        CHECK(rejects([](TrainConfig& t) { t.n = 0; }, "n"));
        CHECK(rejects([](TrainConfig& t) { t.m = 11; }, "m"));
        CHECK(rejects([](TrainConfig& t) { t.lr = 0.0; }, "lr"));
        CHECK(rejects([](TrainConfig& t) { t.sparsity = 1.5; }, "sparsity"));
        CHECK(rejects([](TrainConfig& t) { t.batch = 0; }, "batch"));
        CHECK(rejects([](TrainConfig& t) { t.eps_s = -0.1; }, "eps_s"));
        CHECK(rejects([](TrainConfig& t) { t.activation_pair = "relu+tanh"; }, "activation"));
        CHECK(parse_optimizer("SGD") == OptimizerKind::Sgd);
        CHECK_THROWS_AS(parse_optimizer("lbfgs"), std::invalid_argument);
    }

    TEST_CASE("optimizer steps") {
        std::vector<double> p{1.0, 2.0, 3.0};
        const std::vector<double> g{0.5, -4.0, 1.0};
        const std::vector<unsigned char> mask{1, 1, 0};
        Optimizer sgd(OptimizerKind::Sgd, 0.1);
        sgd.step(p, g, mask);
        CHECK(p[0] == doctest::Approx(0.95));
        CHECK(p[1] == doctest::Approx(2.4));
        CHECK(p[2] == 3.0);
        std::vector<double> q{0.0, 0.0, 0.0};
        Optimizer adam(OptimizerKind::Adam, 0.01);
        adam.step(q, g, mask);
        CHECK(q[0] == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(q[1] == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(q[2] == 0.0);
        CHECK(adam.steps() == 1);
        adam.reset();
        CHECK(adam.steps() == 0);
        CHECK_THROWS_AS(adam.step(q, std::vector<double>(2), mask), std::invalid_argument);
    }

    TEST_CASE("line search stops at the first increase") {
        const DataSplits d = regression(1);
        TrainConfig c = small_config();
        const Network net = initial_network(c, 3, 1);
        const TopoReport r = scan(net, d.train, WidthRule::fixed(2));
        REQUIRE(r.chosen.has_value());
        const auto& phi = r.at(*r.chosen).choice.direction;
        const LineSearchResult ls = line_search(net, d.train, *r.chosen, phi, 1e-3, 1e-3);
        CHECK_FALSE(ls.capped);
        CHECK(ls.loss == evaluate_loss(insert_layer(net, *r.chosen, phi, ls.eps), d.train));
        CHECK(evaluate_loss(insert_layer(net, *r.chosen, phi, ls.eps + 1e-3), d.train) > ls.loss);
        CHECK(ls.loss <= evaluate_loss(net, d.train));
        const LineSearchResult capped = line_search(net, d.train, *r.chosen, phi, 1e-3, 1e-6, 3);
        CHECK(capped.capped);
        CHECK(capped.steps == 3);
    }

    TEST_CASE("semi-guided growth") {
        const DataSplits d = regression(2);
        const TrainConfig c = small_config();
        const auto res = grow_semi(c, d);
        const RunLog& log = res.log;
        CHECK(log.stage_best_val.size() == log.events.size() + 1);
        std::size_t expected_epochs = 0;
        for (std::size_t i = 1; i <= log.stage_best_val.size(); ++i) expected_epochs += scheduled_epochs(c, i);
        CHECK(log.epochs.size() == expected_epochs);
        for (const auto& e : log.events) {
            CHECK(e.loss_after < e.loss_before);
            CHECK(e.width >= 1);
            CHECK(e.width <= c.m);
            CHECK(e.lambda.has_value());
            CHECK(e.scores.size() == e.iteration + 1);
            CHECK(*e.predicted_ratio == doctest::Approx(*e.lambda / e.width));
            CHECK(*e.numerical_ratio == doctest::Approx(*e.predicted_ratio).epsilon(0.05));
        }
        CHECK(res.best_val == *std::min_element(log.stage_best_val.begin(), log.stage_best_val.end()));
        CHECK(res.best_val == doctest::Approx(evaluate_loss(res.best, d.validation)));
        CHECK(res.last.hidden_layers().size() == 1 + log.events.size());
        if (log.stop == StopReason::MaxIterations) CHECK(log.events.size() == c.max_iters);
    }

    TEST_CASE("growth is reproducible from the seed") {
        const DataSplits d = regression(3);
        const TrainConfig c = small_config();
        CHECK(csv(grow_semi(c, d).log) == csv(grow_semi(c, d).log));
        CHECK(csv(grow_baseline("random-insertion", c, d).log) == csv(grow_baseline("random-insertion", c, d).log));
        TrainConfig other = c;
        other.seed = 6;
        CHECK(csv(grow_semi(c, d).log) != csv(grow_semi(other, d).log));
    }

    TEST_CASE("stop reasons") {
        const DataSplits d = regression(4);
        TrainConfig c = small_config();
        c.eps_threshold = 1e9;
        const auto high = grow_semi(c, d);
        CHECK(high.log.stop == StopReason::BelowThreshold);
        CHECK(high.log.events.empty());
        c.eps_threshold = 0.0;
        c.max_iters = 0;
        const auto none = grow_semi(c, d);
        CHECK(none.log.stop == StopReason::MaxIterations);
        CHECK(none.log.events.empty());
        c.max_iters = 1;
        c.eps_threshold = 1e9;
        const auto blind = grow_baseline("net2deeper", c, d);
        CHECK(blind.log.events.size() == 1);
    }

    TEST_CASE("automatic mode trains each stage until patience runs out") {
        const DataSplits d = regression(5);
        TrainConfig c = small_config();
        c.patience = 5;
        c.max_stage_epochs = 40;
        c.max_iters = 2;
        const auto res = grow_auto(c, d);
        std::size_t stage = 0, count = 0;
        for (const auto& e : res.log.epochs) {
            if (e.growth_iteration != stage) {
                stage = e.growth_iteration;
                count = 0;
            }
            ++count;
            CHECK(count <= 40);
        }
        for (const auto& e : res.log.events) CHECK(e.strategy == "auto");
    }

    TEST_CASE("baselines") {
        const DataSplits d = regression(6);
        TrainConfig c = small_config();
        c.max_iters = 2;
        const auto n2d = grow_baseline("net2deeper", c, d);
        for (const auto& e : n2d.log.events) {
            CHECK(e.eps_final == c.sigma_n);
            CHECK(e.scores.empty());
            CHECK_FALSE(e.lambda.has_value());
        }
        const auto ft = grow_baseline("forward-thinking", c, d);
        for (const auto& e : ft.log.events) CHECK(e.interface == e.iteration + 1);
        CHECK(ft.last.hidden_layers().front().frozen);
        CHECK_FALSE(ft.last.hidden_layers().back().frozen);
        const auto fixed = grow_baseline("fixed", c, d);
        CHECK(fixed.best.hidden_layers().size() == 1 + c.max_iters);
        CHECK(fixed.log.epochs.size() == 30 + 40 + 50);
        CHECK(fixed.log.events.empty());
        CHECK_THROWS_AS(grow_baseline("semi", c, d), std::invalid_argument);
        CHECK_THROWS_AS(parse_strategy("greedy"), std::invalid_argument);
    }

    TEST_CASE("fine-tuning changes only the inserted layer") {
        const DataSplits d = regression(7);
        const TrainConfig c = small_config();
        const Network net = initial_network(c, 3, 1);
        const TopoReport r = scan(net, d.train, WidthRule::fixed(1));
        REQUIRE(r.chosen.has_value());
        const std::size_t l = *r.chosen;
        const Network tuned = fine_tune_inserted(net, l, r.at(l).choice.direction, 0.05, d, c, 20);
        CHECK(tuned.hidden_layers().size() == 2);
        CHECK(tuned.input_layer().weight == net.input_layer().weight);
        CHECK(tuned.hidden_layers()[l == 1 ? 1 : 0].weight == net.hidden_layers()[0].weight);
        CHECK(tuned.output_layer().weight == net.output_layer().weight);
        CHECK(tuned.output_layer().bias == net.output_layer().bias);
        const Network start = insert_layer(net, l, r.at(l).choice.direction, 0.05);
        CHECK_FALSE(tuned.hidden_layers()[l - 1].weight == start.hidden_layers()[l - 1].weight);
        CHECK(evaluate_loss(tuned, d.validation) <= evaluate_loss(start, d.validation));
        CHECK_FALSE(tuned.hidden_layers().front().frozen);
        CHECK_FALSE(tuned.output_layer().frozen);
    }

    TEST_CASE("top-ranked interface fine-tunes better than the bottom-ranked one") {
        std::vector<double> top, bottom;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const Dataset a = gen_gaussian_regression(seed, 400, 3, 1);
            const Dataset b = gen_gaussian_regression(seed + 100, 400, 3, 1);
            const DataSplits da{a.slice(0, 300), a.slice(300, 400), {}};
            const DataSplits db{b.slice(0, 300), b.slice(300, 400), {}};
            TrainConfig c = small_config();
            c.seed = seed;
            c.n = 5;
            c.m = 1;
            c.max_iters = 3;
            c.epochs_base = 150;
            c.epochs_step = 50;
            c.batch = 300;
            const Network net = grow_semi(c, da).best;
            const auto ranked = transfer_rank(net, db.train);
            REQUIRE(ranked.size() >= 2);
            auto tuned_mse = [&](std::size_t l) {
                const TopoReport r = scan(net, db.train, WidthRule::fixed(c.m));
                const auto& phi = r.at(l).choice.direction;
                if (phi.empty()) return model_mse(net, db.validation);
                const LineSearchResult ls = line_search(net, db.train, l, phi, c.eps, c.tau1);
                return model_mse(fine_tune_inserted(net, l, phi, ls.eps, db, c, 100), db.validation);
            };
            top.push_back(tuned_mse(ranked.front().interface));
            bottom.push_back(tuned_mse(ranked.back().interface));
        }
        std::sort(top.begin(), top.end());
        std::sort(bottom.begin(), bottom.end());
        CHECK(top[2] < bottom[2]);
    }

    TEST_CASE("event JSON carries every field") {
        GrowthEvent e;
        e.iteration = 2;
        e.strategy = "semi";
        e.interface = 3;
        e.scores = {{1, 0.5}, {2, 0.25}};
        e.width = 2;
        e.lambda = 0.5;
        const auto j = nlohmann::json::parse(event_to_json(e));
        for (const char* k : {"iteration", "strategy", "inserted_at", "eps_final", "scores", "m", "loss_before",
                              "loss_after", "lambda", "predicted_ratio", "numerical_ratio", "line_search_capped"})
            CHECK(j.contains(k));
        CHECK_FALSE(j.contains("wall_ms"));
        CHECK(j["scores"][1]["l"] == 2);
        CHECK(j["predicted_ratio"].is_null());
    }

    TEST_CASE("rbf chain grows under every strategy") {
        const RbfProblem prob = gen_rbf_dataset(1, 200, 50, 50, 4);
        TrainConfig c;
        c.init_layers = 1;
        c.max_iters = 2;
        c.epochs_base = 20;
        c.epochs_step = 0;
        c.batch = 200;
        c.lr = 1e-2;
        c.eps_threshold = 0.0;
        c.n = 1;
        c.m = 1;
        for (const char* s : {"semi", "auto", "random-insertion", "net2deeper", "forward-thinking", "fixed"}) {
            CAPTURE(s);
            const auto res = grow_rbf(s, c, prob.splits);
            CHECK(res.best.layers.size() >= 1);
            for (const auto& e : res.log.events) CHECK(e.interface <= e.iteration);
        }
        CHECK(grow_rbf("fixed", c, prob.splits).best.layers.size() == 3);
    }
    TEST_CASE("line search with a step past the basin keeps the initial eps") {
        const DataSplits d = regression(2);
        const Network net = initial_network(small_config(), 3, 1);
        const TopoReport r = scan(net, d.train, WidthRule::fixed(1));
        REQUIRE(r.chosen.has_value());
        const LineSearchResult ls = line_search(net, d.train, *r.chosen, r.at(*r.chosen).choice.direction, 1e-3, 50.0);
        CHECK(ls.eps == 1e-3);
        CHECK(ls.steps == 0);
    }

    TEST_CASE("automatic width with zero tolerance activates one neuron") {
        const DataSplits d = regression(8);
        TrainConfig c = small_config();
        c.eps_s = 0.0;
        c.patience = 3;
        c.max_stage_epochs = 20;
        const auto res = grow_auto(c, d);
        REQUIRE_FALSE(res.log.events.empty());
        for (const auto& e : res.log.events) CHECK(e.width == 1);
    }

    TEST_CASE("patience of one ends a worsening stage after one epoch") {
        const DataSplits d = regression(9);
        TrainConfig c = small_config();
        c.optimizer = OptimizerKind::Sgd;
        c.lr = 1e3;
        c.patience = 1;
        c.max_iters = 1;
        const auto res = grow_auto(c, d);
        REQUIRE(res.log.epochs.size() >= 1);
        CHECK(res.log.epochs.front().val_loss > res.log.stage_best_val.front());
        CHECK(res.log.epochs.size() == res.log.stage_best_val.size());
    }

    TEST_CASE("net2deeper without noise leaves the loss unchanged") {
        const DataSplits d = regression(10);
        TrainConfig c = small_config();
        c.sigma_n = 0.0;
        c.max_iters = 2;
        const auto res = grow_baseline("net2deeper", c, d);
        REQUIRE_FALSE(res.log.events.empty());
        for (const auto& e : res.log.events) {
            CHECK(e.eps_final == 0.0);
            CHECK(e.loss_after == e.loss_before);
        }
    }
}
