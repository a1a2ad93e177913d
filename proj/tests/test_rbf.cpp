#include <cmath>
#include <sstream>

#include "doctest.h"
#include "grownet/rbf.hpp"

using namespace grownet;

namespace {

RbfChain random_chain(std::uint64_t seed, std::size_t depth, double sd = 0.7) {
    Rng rng(seed);
    RbfChain c;
    c.center = 0.1;
    for (std::size_t k = 0; k < depth; ++k) c.layers.push_back({sd * rng.normal(), sd * rng.normal(), sd * rng.normal()});
    return c;
}

Dataset scalar_data(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    Dataset d;
    d.inputs = Matrix(n, 1);
    d.labels = Matrix(n, 1);
    for (double& v : d.inputs.data()) v = rng.uniform(-2.0, 2.0);
    for (double& v : d.labels.data()) v = rng.normal();
    return d;
}

}  // namespace

TEST_SUITE("rbf") {
    TEST_CASE("layer map vanishes with its first derivatives at zero parameters") {
        RbfChain c;
        c.center = 0.3;
        const RbfLayer zero{};
        CHECK(c.layer_map(zero, 1.7) == 0.0);
        const double h = 1e-6;
        for (int i = 0; i < 3; ++i) {
            RbfLayer plus{}, minus{};
            std::array<double*, 3> pp{&plus.scale, &plus.shift, &plus.amplitude};
            std::array<double*, 3> pm{&minus.scale, &minus.shift, &minus.amplitude};
            *pp[i] = h;
            *pm[i] = -h;
            CHECK(std::abs(c.layer_map(plus, 1.7) - c.layer_map(minus, 1.7)) / (2 * h) < 1e-12);
        }
        const RbfLayer l{0.5, -0.2, 2.0};
        const double u = 0.5 * 1.7 - 0.2 - 0.3;
        CHECK(c.layer_map(l, 1.7) == doctest::Approx(2.0 * (std::exp(-u * u / 2) - std::exp(-0.045))));
        c.center = 0.0;
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    }

    TEST_CASE("adjoint gradient matches central differences") {
        const RbfChain c = random_chain(1, 4);
        const Dataset d = scalar_data(2, 20);
        const RbfTrace t = rbf_forward_adjoint(c, d);
        CHECK(t.loss == doctest::Approx(rbf_loss(c, d)).epsilon(1e-14));
        const auto base = c.parameters();
        for (std::size_t i = 0; i < base.size(); ++i) {
            auto at = [&](double delta) {
                RbfChain p = c;
                auto v = base;
                v[i] += delta;
                p.set_parameters(v);
                return rbf_loss(p, d);
            };
            const double h = 1e-5;
            const double fd = (at(h) - at(-h)) / (2 * h);
            CHECK(t.grads[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
        }
    }

    TEST_CASE("frozen layers get zero gradient") {
        RbfChain c = random_chain(3, 3);
        c.layers[1].frozen = true;
        const RbfTrace t = rbf_forward_adjoint(c, scalar_data(4, 10));
        CHECK(t.grads[3] == 0.0);
        CHECK(t.grads[4] == 0.0);
        CHECK(t.grads[5] == 0.0);
        CHECK(c.trainable_mask() == std::vector<unsigned char>{1, 1, 1, 0, 0, 0, 1, 1, 1});
    }

    TEST_CASE("zero insertion is an identity at every interface") {
        const RbfChain c = random_chain(5, 3);
        const Dataset d = scalar_data(6, 15);
        const RbfTrace base = rbf_forward_adjoint(c, d);
        for (std::size_t l = 0; l <= 3; ++l) {
            const RbfChain g = rbf_insert(c, l, std::array<double, 3>{0.6, 0.0, 0.8}, 0.0);
            const RbfTrace t = rbf_forward_adjoint(g, d);
            CHECK(t.loss == base.loss);
            CHECK(t.states.back() == base.states.back());
            CHECK(t.grads[3 * l] == 0.0);
            CHECK(t.grads[3 * l + 1] == 0.0);
        }
        CHECK_THROWS_AS(rbf_insert(c, 4, std::array<double, 3>{1, 0, 0}, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(rbf_insert(c, 0, std::array<double, 3>{1, 1, 0}, 0.1), std::invalid_argument);
    }

    TEST_CASE("block has the closed form and matches the Hessian") {
        const RbfChain c = random_chain(7, 3);
        const Dataset d = scalar_data(8, 12);
        const RbfTrace t = rbf_forward_adjoint(c, d);
        const double c1 = 0.1 * std::exp(-0.005);
        for (std::size_t l = 0; l <= 3; ++l) {
            const Matrix q = rbf_block(t, l, c.center);
            double px = 0.0, p = 0.0;
            for (std::size_t s = 0; s < 12; ++s) {
                px += t.adjoints[l][s] * t.states[l][s];
                p += t.adjoints[l][s];
            }
            CHECK(q(0, 0) == 0.0);
            CHECK(q(1, 1) == 0.0);
            CHECK(q(2, 2) == 0.0);
            CHECK(q(0, 1) == 0.0);
            CHECK(q(0, 2) == doctest::Approx(0.5 * c1 * px));
            CHECK(q(1, 2) == doctest::Approx(0.5 * c1 * p));
            const Matrix h = rbf_finite_difference_hessian(c, d, l);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(q(i, j) + 0.5 * h(i, j)) < 1e-6);
        }
    }

    TEST_CASE("scan covers interfaces 0..L and the top eigenvalue is the block norm") {
        const RbfChain c = random_chain(9, 2);
        const Dataset d = scalar_data(10, 30);
        const TopoReport r = rbf_scan(c, d);
        REQUIRE(r.interfaces.size() == 3);
        const RbfTrace t = rbf_forward_adjoint(c, d);
        for (std::size_t l = 0; l <= 2; ++l) {
            CHECK(r.interfaces[l].interface == l);
            const Matrix q = rbf_block(t, l, c.center);
            const double expect = std::hypot(q(0, 2), q(1, 2));
            CHECK(r.interfaces[l].choice.lambda == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    TEST_CASE("generated dataset is reproducible and follows the truth chain") {
        const RbfProblem a = gen_rbf_dataset(3, 50, 10, 20);
        const RbfProblem b = gen_rbf_dataset(3, 50, 10, 20);
        const RbfProblem other = gen_rbf_dataset(4, 50, 10, 20);
        CHECK(a.splits.train.inputs == b.splits.train.inputs);
        CHECK(a.splits.test.labels == b.splits.test.labels);
        CHECK_FALSE(a.splits.train.inputs == other.splits.train.inputs);
        CHECK(a.truth.layers.size() == 15);
        CHECK(a.splits.validation.size() == 10);
        CHECK(rbf_loss(a.truth, a.splits.train) == 0.0);
        for (double x : a.splits.train.inputs.data()) {
            CHECK(x >= -2.0);
            CHECK(x <= 2.0);
        }
    }

    TEST_CASE("checkpoint round trip is bit-exact") {
        RbfChain c = random_chain(11, 4);
        c.layers[2].frozen = true;
        std::stringstream ss;
        save_rbf_checkpoint(c, ss);
        const RbfChain back = load_rbf_checkpoint(ss);
        CHECK(back.parameters() == c.parameters());
        CHECK(back.center == c.center);
        CHECK(back.trainable_mask() == c.trainable_mask());
        std::stringstream bad("grownet-rbf 1\ncenter zz\n");
        CHECK_THROWS_AS(load_rbf_checkpoint(bad), IoError);
    }

    TEST_CASE("multi-column data is rejected") {
        Dataset d;
        d.inputs = Matrix(2, 2);
        d.labels = Matrix(2, 1);
        CHECK_THROWS_AS(rbf_loss(random_chain(1, 1), d), std::invalid_argument);
    }
    TEST_CASE("block of a single hand-built sample") {
        RbfTrace t;
        t.states = {{2.0}};
        t.adjoints = {{1.0}};
        const Matrix q = rbf_block(t, 0, 0.1);
        const double c1 = 0.1 * std::exp(-0.005);
        CHECK(q(0, 2) == doctest::Approx(c1).epsilon(1e-15));
        CHECK(q(1, 2) == doctest::Approx(0.5 * c1).epsilon(1e-15));
        CHECK(q(2, 0) == q(0, 2));
        CHECK(q(2, 1) == q(1, 2));
    }

    TEST_CASE("loss decrease ratio approaches lambda") {
        const RbfChain c = random_chain(11, 3);
        const Dataset d = scalar_data(12, 40);
        const TopoReport r = rbf_scan(c, d);
        REQUIRE(r.chosen.has_value());
        const InterfaceReport& ir = r.at(*r.chosen);
        const double j0 = rbf_loss(c, d);
        double last = 0.0;
        for (double eps : {1e-2, 5e-3, 1e-3}) {
            last = (j0 - rbf_loss(rbf_insert(c, *r.chosen, ir.choice.direction, eps), d)) / (eps * eps);
        }
        CHECK(std::abs(last - ir.choice.lambda) <= 0.05 * ir.choice.lambda);
    }
}
