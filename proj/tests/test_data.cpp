#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "grownet/data.hpp"

using namespace grownet;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
    fs::path dir = fs::path(GROWNET_TEST_TMP) / "data";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = tmp(name);
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_SUITE("data") {
    TEST_CASE("two-row file") {
        const auto d = load_csv(write("two.csv", "x0,y0\n1.5,2\n-3,4e-2\n"), 1, 1);
        CHECK(d.size() == 2);
        CHECK(d.inputs(1, 0) == -3.0);
        CHECK(d.labels(1, 0) == 0.04);
    }

    TEST_CASE("schema errors carry the line number") {
        try {
            load_csv(write("bad.csv", "x0,y0\n1,2\n3,abc\n"), 1, 1);
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(load_csv(write("hdr.csv", "a,b\n1,2\n"), 1, 1), SchemaError);
        CHECK_THROWS_AS(load_csv(write("cols.csv", "x0,y0\n1,2,3\n"), 1, 1), SchemaError);
        CHECK_THROWS_AS(load_csv(write("empty.csv", "x0,y0\n"), 1, 1), SchemaError);
        CHECK_THROWS_AS(load_csv(write("inf.csv", "x0,y0\n1,inf\n"), 1, 1), SchemaError);
        CHECK_THROWS_AS(load_csv(tmp("missing.csv"), 1, 1), IoError);
    }

    TEST_CASE("save and load round trip bit-exactly") {
        Dataset d = gen_gaussian_regression(3, 50, 3, 2);
        d.inputs(0, 0) = 1.0 / 3.0;
        d.labels(1, 1) = -5e-300;
        for (const char* name : {"rt.csv", "rt.csv.gz"}) {
            save_csv(d, tmp(name));
            const Dataset back = load_csv(tmp(name), 3, 2);
            CHECK(back.inputs == d.inputs);
            CHECK(back.labels == d.labels);
        }
    }

    TEST_CASE("standardize uses training statistics only") {
        Dataset train = gen_gaussian_regression(1, 200, 3, 1);
        for (std::size_t r = 0; r < train.size(); ++r) train.inputs(r, 1) = 5.0 + 3.0 * train.inputs(r, 1);
        const Dataset val = gen_gaussian_regression(2, 40, 3, 1);
        const std::vector<Dataset> others{val};
        const auto res = standardize(train, others);
        for (std::size_t j = 0; j < 3; ++j) {
            double mean = 0.0, sq = 0.0;
            for (std::size_t r = 0; r < train.size(); ++r) mean += res.train.inputs(r, j);
            mean /= 200.0;
            for (std::size_t r = 0; r < train.size(); ++r) sq += std::pow(res.train.inputs(r, j) - mean, 2);
            CHECK(std::abs(mean) < 1e-12);
            CHECK(std::abs(std::sqrt(sq / 200.0) - 1.0) < 1e-12);
        }
        const double expect = (val.inputs(0, 1) - res.stats.mean[1]) / res.stats.stddev[1];
        CHECK(res.others[0].inputs(0, 1) == expect);
        CHECK(res.warnings.empty());
        const Matrix back = invert_normalization(res.train.inputs, res.stats);
        CHECK((back - train.inputs).max_abs() < 1e-12);
    }

    TEST_CASE("constant feature passes through with a warning") {
        Dataset d = gen_gaussian_regression(4, 10, 2, 1);
        for (std::size_t r = 0; r < d.size(); ++r) d.inputs(r, 0) = 7.0;
        const auto res = standardize(d);
        CHECK(res.warnings.size() == 1);
        CHECK(res.train.inputs(3, 0) == 7.0);
        CHECK_THROWS_AS(standardize(Dataset{}), std::invalid_argument);
    }

    TEST_CASE("generator is seeded") {
        const auto a = gen_gaussian_regression(11, 20, 2, 1);
        const auto b = gen_gaussian_regression(11, 20, 2, 1);
        const auto c = gen_gaussian_regression(12, 20, 2, 1);
        CHECK(a.inputs == b.inputs);
        CHECK(a.labels == b.labels);
        CHECK(!(a.labels == c.labels));
        TeacherOptions zero;
        zero.weight_scale = 0.0;
        CHECK(gen_gaussian_regression(1, 5, 2, 1, zero).labels.max_abs() == 0.0);
    }

    TEST_CASE("select and slice") {
        const auto d = gen_gaussian_regression(1, 6, 1, 1);
        const std::vector<std::size_t> idx{4, 0};
        const auto s = d.select(idx);
        CHECK(s.size() == 2);
        CHECK(s.inputs(0, 0) == d.inputs(4, 0));
        CHECK(d.slice(2, 5).size() == 3);
    }
    TEST_CASE("label variance grows with the teacher weight scale") {
        double prev = 0.0;
        for (double scale : {0.5, 1.0, 2.0}) {
            TeacherOptions t;
            t.weight_scale = scale;
            const Matrix y = gen_gaussian_regression(4, 2000, 3, 1, t).labels;
            double mean = 0.0, sq = 0.0;
            for (double v : y.data()) mean += v;
            mean /= 2000.0;
            for (double v : y.data()) sq += (v - mean) * (v - mean);
            const double var = sq / 2000.0;
            CHECK(var > prev);
            prev = var;
        }
    }
}
