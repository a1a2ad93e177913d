#include <cmath>

#include "doctest.h"
#include "grownet/topo.hpp"
#include "json.hpp"

using namespace grownet;

namespace {

struct Problem {
    Network net;
    Dataset data;
};

Problem problem(std::uint64_t seed, std::size_t width = 3, std::size_t hidden = 2, std::size_t samples = 8,
                const char* pair = "swish+tanh") {
    Rng rng(seed);
    NetworkSpec s;
    s.input_dim = 2;
    s.output_dim = 2;
    s.width = width;
    s.hidden_count = hidden;
    s.activation = make_admissible(pair);
    Problem p{Network(s, rng, 0.6), {}};
    p.data.inputs = Matrix(samples, 2);
    p.data.labels = Matrix(samples, 2);
    for (double& v : p.data.inputs.data()) v = rng.normal();
    for (double& v : p.data.labels.data()) v = rng.normal();
    return p;
}

TopoBlock block_with(double top, std::size_t neuron, std::size_t interface = 1, std::size_t dim = 2) {
    TopoBlock b;
    b.interface = interface;
    b.neuron = neuron;
    b.q = Matrix(dim, dim);
    b.q(0, 0) = top;
    b.top_eigenvalue = top;
    b.top_eigenvector.assign(dim, 0.0);
    b.top_eigenvector[0] = 1.0;
    return b;
}

}  // namespace

TEST_SUITE("topo") {
    TEST_CASE("blocks follow the adjoint-weighted state outer product") {
        const Problem p = problem(1);
        Trace t = forward(p.net, p.data);
        adjoint(p.net, t);
        const double s2 = p.net.spec().activation.d2(0.0);
        for (std::size_t l = 1; l <= p.net.interface_count(); ++l) {
            const auto blocks = assemble_blocks(p.net, t, l);
            REQUIRE(blocks.size() == 3);
            const Matrix& x = t.state_at(l);
            const Matrix& pa = t.adjoint_at(l);
            for (std::size_t r = 0; r < 3; ++r)
                for (std::size_t i = 0; i < 3; ++i)
                    for (std::size_t j = 0; j < 3; ++j) {
                        double ref = 0.0;
                        for (std::size_t s = 0; s < x.rows(); ++s) ref += pa(s, r) * x(s, i) * x(s, j);
                        CHECK(blocks[r].q(i, j) == doctest::Approx(0.5 * s2 * ref).epsilon(1e-13));
                    }
        }
        CHECK_THROWS_AS(assemble_blocks(p.net, t, 0), std::invalid_argument);
        CHECK_THROWS_AS(assemble_blocks(p.net, t, 4), std::invalid_argument);
        Trace no_adj = forward(p.net, p.data);
        CHECK_THROWS_AS(assemble_blocks(p.net, no_adj, 1), std::invalid_argument);
    }

    TEST_CASE("Q is minus half the Hessian of the loss") {
        for (const char* pair : {"swish+tanh", "mish+tanh", "swish+mish"}) {
            const Problem p = problem(2, 3, 1, 6, pair);
            Trace t = forward(p.net, p.data);
            adjoint(p.net, t);
            for (std::size_t l = 1; l <= p.net.interface_count(); ++l) {
                const Matrix q = full_q(assemble_blocks(p.net, t, l));
                const Matrix h = finite_difference_hessian(p.net, p.data, l);
                REQUIRE(q.rows() == h.rows());
                for (std::size_t i = 0; i < q.rows(); ++i)
                    for (std::size_t j = 0; j < q.cols(); ++j)
                        CHECK(std::abs(q(i, j) + 0.5 * h(i, j)) <= 1e-5 * q.max_abs());
            }
        }
    }

    TEST_CASE("Q is half the second derivative of the Hamiltonian") {
        const Problem p = problem(3);
        Trace t = forward(p.net, p.data);
        adjoint(p.net, t);
        Rng rng(9);
        std::vector<double> phi(9);
        for (double& v : phi) v = rng.normal();
        const double nrm = norm2(phi);
        for (double& v : phi) v /= nrm;
        for (std::size_t l = 1; l <= 3; ++l) {
            const Matrix q = full_q(assemble_blocks(p.net, t, l));
            double quad = 0.0;
            for (std::size_t i = 0; i < 9; ++i)
                for (std::size_t j = 0; j < 9; ++j) quad += phi[i] * q(i, j) * phi[j];
            const double h = 1e-3;
            auto ham = [&](double e) {
                std::vector<double> th = phi;
                for (double& v : th) v *= e;
                return hamiltonian_at(p.net, t, l, th);
            };
            const double second = (ham(h) - 2.0 * ham(0.0) + ham(-h)) / (h * h);
            CHECK(0.5 * second == doctest::Approx(quad).epsilon(1e-5));
        }
    }

    TEST_CASE("selected direction has unit norm and quadratic form lambda / m") {
        const Problem p = problem(4, 4, 2, 10);
        Trace t = forward(p.net, p.data);
        adjoint(p.net, t);
        for (std::size_t l = 1; l <= 3; ++l) {
            const auto blocks = assemble_blocks(p.net, t, l);
            const Matrix q = full_q(blocks);
            for (std::size_t m = 1; m <= 4; ++m) {
                const DirectionChoice c = select_direction(blocks, WidthRule::fixed(m));
                if (c.width == 0) continue;
                CHECK(c.width <= m);
                CHECK(norm2(c.direction) == doctest::Approx(1.0).epsilon(1e-14));
                double quad = 0.0;
                for (std::size_t i = 0; i < q.rows(); ++i)
                    for (std::size_t j = 0; j < q.cols(); ++j) quad += c.direction[i] * q(i, j) * c.direction[j];
                CHECK(quad == doctest::Approx(c.lambda / static_cast<double>(c.width)).epsilon(1e-10));
            }
        }
    }

    TEST_CASE("fixed width rule takes the largest positive blocks") {
        const std::vector<TopoBlock> blocks{block_with(1.0, 0), block_with(4.0, 1), block_with(-2.0, 2),
                                            block_with(3.0, 3)};
        const DirectionChoice two = select_direction(blocks, WidthRule::fixed(2));
        CHECK(two.width == 2);
        CHECK(two.neurons == std::vector<std::size_t>{1, 3});
        CHECK(two.lambda == 7.0);
        CHECK(two.direction[2] == doctest::Approx(1.0 / std::sqrt(2.0)));
        CHECK(two.direction[6] == doctest::Approx(1.0 / std::sqrt(2.0)));
        const DirectionChoice all = select_direction(blocks, WidthRule::fixed(4));
        CHECK(all.width == 3);
        CHECK(all.lambda == 8.0);
    }

    TEST_CASE("automatic width rule boundaries") {
        const std::vector<TopoBlock> blocks{block_with(4.0, 0), block_with(3.0, 1), block_with(2.0, 2),
                                            block_with(1.0, 3)};
        CHECK(select_direction(blocks, WidthRule::automatic(0.0)).width == 1);
        CHECK(select_direction(blocks, WidthRule::automatic(0.25)).width == 2);
        CHECK(select_direction(blocks, WidthRule::automatic(0.5)).width == 3);
        CHECK(select_direction(blocks, WidthRule::automatic(0.74)).width == 3);
        CHECK(select_direction(blocks, WidthRule::automatic(0.75)).width == 4);
        CHECK(select_direction(blocks, WidthRule::automatic(1.0)).width == 4);
        std::size_t prev = 0;
        for (double e = 0.0; e <= 1.0; e += 0.01) {
            const std::size_t w = select_direction(blocks, WidthRule::automatic(e)).width;
            CHECK(w >= prev);
            prev = w;
        }
    }

    TEST_CASE("no positive block selects nothing") {
        const std::vector<TopoBlock> blocks{block_with(-1.0, 0), block_with(-0.5, 1)};
        const DirectionChoice c = select_direction(blocks, WidthRule::fixed(2));
        CHECK(c.width == 0);
        CHECK(c.direction.empty());
        CHECK(c.lambda == -0.5);
        const TopoReport r = build_report({blocks}, WidthRule::fixed(1));
        CHECK_FALSE(r.chosen.has_value());
        CHECK_FALSE(r.should_insert(-10.0));
    }

    TEST_CASE("report picks the largest score with ties to the smallest interface") {
        const std::vector<std::vector<TopoBlock>> per{
            {block_with(1.0, 0, 1)}, {block_with(3.0, 0, 2)}, {block_with(3.0, 0, 3)}, {block_with(2.0, 0, 4)}};
        const TopoReport r = build_report(per, WidthRule::fixed(1));
        REQUIRE(r.chosen.has_value());
        CHECK(*r.chosen == 2);
        CHECK(r.max_score == 3.0);
        CHECK(r.should_insert(3.0));
        CHECK_FALSE(r.should_insert(3.5));
        const auto j = nlohmann::json::parse(report_to_json(r));
        CHECK(j["interfaces"].size() == 4);
        CHECK(j["mode"] == "fixed");
    }

    TEST_CASE("auto score is lambda per activated neuron") {
        const std::vector<std::vector<TopoBlock>> per{{block_with(4.0, 0, 1), block_with(3.0, 1, 1)},
                                                      {block_with(5.0, 0, 2), block_with(1.0, 1, 2)}};
        const TopoReport r = build_report(per, WidthRule::automatic(0.5));
        CHECK(r.interfaces[0].score == 3.5);
        CHECK(r.interfaces[1].score == 5.0);
    }

    TEST_CASE("numerical ratio converges to the predicted one") {
        const Problem p = problem(5);
        const TopoReport r = scan(p.net, p.data, WidthRule::fixed(2));
        REQUIRE(r.chosen.has_value());
        const InterfaceReport& ir = r.at(*r.chosen);
        const double predicted = ir.choice.lambda / static_cast<double>(ir.choice.width);
        const std::vector<double> eps{1e-1, 1e-2, 1e-3};
        const auto samples = numerical_derivative(p.net, p.data, *r.chosen, ir.choice.direction, eps);
        double prev_err = 1e300;
        for (const auto& s : samples) {
            const double err = std::abs(s.ratio - predicted);
            CHECK(err < prev_err);
            prev_err = err;
        }
        CHECK(extrapolated_derivative(p.net, p.data, *r.chosen, ir.choice.direction) ==
              doctest::Approx(predicted).epsilon(1e-6));
    }

    TEST_CASE("transfer rank orders interfaces by lambda") {
        const Problem p = problem(6);
        const Problem other = problem(7);
        const auto ranked = transfer_rank(p.net, other.data);
        REQUIRE(ranked.size() == 3);
        for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].lambda >= ranked[i].lambda);
        Dataset wrong;
        wrong.inputs = Matrix(3, 5);
        wrong.labels = Matrix(3, 2);
        CHECK_THROWS_AS(transfer_rank(p.net, wrong), std::invalid_argument);
    }
    TEST_CASE("scaling the adjoints scales lambda and keeps the choice") {
        const Problem p = problem(8);
        Trace t = forward(p.net, p.data);
        adjoint(p.net, t);
        const TopoReport r1 = scan(p.net, t, WidthRule::fixed(2));
        for (Matrix& a : t.adjoints)
            for (double& v : a.data()) v *= 3.0;
        const TopoReport r3 = scan(p.net, t, WidthRule::fixed(2));
        REQUIRE(r1.chosen.has_value());
        CHECK(r3.chosen == r1.chosen);
        for (std::size_t i = 0; i < r1.interfaces.size(); ++i) {
            const auto& a = r1.interfaces[i].choice;
            const auto& b = r3.interfaces[i].choice;
            CHECK(b.lambda == doctest::Approx(3.0 * a.lambda).epsilon(1e-12));
            CHECK(b.neurons == a.neurons);
            REQUIRE(b.direction.size() == a.direction.size());
            for (std::size_t k = 0; k < a.direction.size(); ++k)
                CHECK(b.direction[k] == doctest::Approx(a.direction[k]).epsilon(1e-9));
        }
    }

    TEST_CASE("transfer rank is zero on labels the network already fits") {
        const Problem p = problem(9);
        Dataset own = p.data;
        own.labels = forward(p.net, own).output;
        for (const auto& r : transfer_rank(p.net, own)) CHECK(r.lambda == 0.0);
    }
}
