#include <doctest.h>

#include <random>

#include "gradcheck_suite.hpp"
#include "helpers.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/tensor.hpp"
#include "oracles.hpp"

using namespace mmfuse;
using ad::Graph;
using M = Mat<double>;

TEST_CASE("sum gives all-ones gradient") {
    Graph<double> g;
    std::mt19937_64 rng(1);
    const auto x = g.variable(oracle::random_matrix(3, 4, rng));
    g.backward(ad::sum(x));
    CHECK(g.grad(x) == M::Ones(3, 4));
}

TEST_CASE("product gradient") {
    Graph<double> g;
    std::mt19937_64 rng(2);
    const M xv = oracle::random_matrix(2, 3, rng), yv = oracle::random_matrix(2, 3, rng);
    const auto x = g.variable(xv), y = g.variable(yv);
    g.backward(ad::sum(ad::mul(x, y)));
    CHECK(g.grad(x) == yv);
    CHECK(g.grad(y) == xv);
}

TEST_CASE("second backward throws") {
    Graph<double> g;
    const auto x = g.variable(M::Ones(2, 2));
    const auto l = ad::sum(x);
    g.backward(l);
    CHECK_THROWS_AS(g.backward(l), Error);
}

TEST_CASE("backward needs a scalar") {
    Graph<double> g;
    const auto x = g.variable(M::Ones(2, 2));
    CHECK_THROWS_AS(g.backward(x), InvalidInput);
}

TEST_CASE("shape errors name both shapes") {
    Graph<double> g;
    const auto a = g.variable(M::Ones(2, 3)), b = g.variable(M::Ones(2, 3));
    try {
        ad::matmul(a, b);
        FAIL("expected InvalidInput");
    } catch (const InvalidInput &e) {
        CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::add(a, g.variable(M::Ones(3, 2))), InvalidInput);
}

TEST_CASE("finite differences on a linear function are exact") {
    std::mt19937_64 rng(3);
    const M w = oracle::random_matrix(4, 2, rng);
    const ad::LossBuilder<double> f = [&](Graph<double> &g, std::span<const ad::Var<double>> p) {
        return ad::sum(ad::matmul(p[0], g.constant(w)));
    };
    const auto r = ad::finite_diff_check<double>(f, {oracle::random_matrix(3, 4, rng)}, 1e-4);
    CHECK(r.max_rel_error < 1e-8);
    CHECK(r.coordinates_checked == 12);
}

TEST_CASE("every primitive passes a gradient check") {
    for (const auto &c : testing::run_gradcheck_suite(2)) {
        INFO(c.name << " seed " << c.seed << " " << c.worst << " analytic " << c.analytic << " numeric " << c.numeric);
        CHECK(c.max_rel_error < 1e-4);
        CHECK(c.invariant_grad < 1e-12);
    }
}

TEST_CASE("layer norm forward matches the oracle") {
    std::mt19937_64 rng(4);
    const M x = oracle::random_matrix(3, 6, rng), gm = oracle::random_matrix(1, 6, rng), bt = oracle::random_matrix(1, 6, rng);
    Graph<double> g;
    const M y = ad::layer_norm(g.constant(x), g.constant(gm), g.constant(bt)).value();
    CHECK(oracle::max_abs_diff(oracle::layer_norm(oracle::to_rows(x), oracle::to_rows(gm), oracle::to_rows(bt)), y) < 1e-12);
}

TEST_CASE("attention rows sum to one and match the oracle") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = dim(rng), m = dim(rng), dk = dim(rng), dv = dim(rng);
        const M q = oracle::random_matrix(n, dk, rng), k = oracle::random_matrix(m, dk, rng), v = oracle::random_matrix(m, dv, rng);
        M w;
        const M out = ad::attention(q, k, v, &w);
        for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-9);
        oracle::Matrix ow;
        const auto ref = oracle::attention(oracle::to_rows(q), oracle::to_rows(k), oracle::to_rows(v), &ow);
        CHECK(oracle::max_abs_diff(ref, out) < 1e-10);
        CHECK(oracle::max_abs_diff(ow, w) < 1e-10);
    }
}

TEST_CASE("single key attention returns V") {
    std::mt19937_64 rng(6);
    const M q = oracle::random_matrix(4, 3, rng), k = oracle::random_matrix(1, 3, rng), v = oracle::random_matrix(1, 5, rng);
    const M out = ad::attention(q, k, v);
    for (Eigen::Index r = 0; r < 4; ++r) CHECK(out.row(r) == v.row(0));
}

TEST_CASE("attention shape errors") {
    const M q = M::Ones(2, 3), k = M::Ones(4, 2), v = M::Ones(4, 2);
    CHECK_THROWS_AS(ad::attention(q, k, v), InvalidInput);
    CHECK_THROWS_AS(ad::attention(q, M::Ones(4, 3).eval(), M::Ones(3, 2).eval()), InvalidInput);
}

TEST_CASE("parameter files round trip") {
    testing::TempDir dir("params");
    std::mt19937_64 rng(7);
    ad::ParameterSet<double> ps;
    ps.add("a", oracle::random_matrix(2, 3, rng));
    ps.add("b.w", oracle::random_matrix(1, 4, rng));
    ad::save_parameters(dir.path / "p.bin", ps);
    const auto back = ad::load_parameters<double>(dir.path / "p.bin");
    REQUIRE(back.size() == 2);
    CHECK(back.name(1) == "b.w");
    CHECK(back["a"] == ps["a"]);
    CHECK(back["b.w"] == ps["b.w"]);
    CHECK_THROWS_AS(ad::load_parameters<double>(dir.path / "none.bin"), IoError);
    CHECK_THROWS_AS(ps.add("a", M::Ones(1, 1)), InvalidInput);
}
