#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "qrate/oracle.hpp"

using namespace qrate;
using namespace fixtures;

TEST_CASE("oracle anchors") {
    auto mj1 = localize(j1(), 1u);
    CHECK(oracle::brute_force_L(mj1, Vec{0.0}, 0.01) == doctest::Approx(1.0).epsilon(0.02));

    // the zero-cost point tau = (0.6, 0.6) lies on the grid
    auto mj2 = localize(j2(), 3u);
    CHECK(std::fabs(oracle::brute_force_L(mj2, Vec{0.0, 0.0}, 0.01)) <= 1e-10);

    auto mp2u = localize(p2u(), 3u);
    double expect = 2.0 * std::pow(std::sqrt(2.0) - std::sqrt(1.5), 2);
    CHECK(oracle::brute_force_L(mp2u, Vec{0.0, 0.0}, 0.01) == doctest::Approx(expect).epsilon(0.3));
    CHECK(std::fabs(oracle::brute_force_L(mp2u, Vec{0.0, 0.0}, 0.01) - expect) <= 0.02);
}

TEST_CASE("oracle matches the solver off the symmetric axis") {
    auto spec = p2();
    auto model = localize(spec, 1u);
    Vec beta{0.0, -0.5};
    double solver = local_rate(spec, 1u, beta).value;
    double grid = oracle::brute_force_L(model, beta, 0.01);
    CHECK(std::fabs(solver - grid) <= 0.02);
}

TEST_CASE("oracle matches the solver on random one-sided facets") {
    TestRng rng(101);
    for (auto spec : {j2(), j2u()}) {
        auto model1 = localize(spec, 1u);
        for (int trial = 0; trial < 4; ++trial) {
            Vec beta{0.0, rng.uniform(-0.6, 0.6)};
            double solver = local_rate(spec, 1u, beta).value;
            double grid = oracle::brute_force_L(model1, beta, 0.01);
            REQUIRE(std::isfinite(solver));
            CHECK(std::fabs(solver - grid) <= 0.02);
        }
    }
}

TEST_CASE("oracle refuses instances above desk scale") {
    auto m3 = localize(j3(), full_mask(3));
    CHECK_THROWS_AS(oracle::brute_force_L(m3, Vec{0, 0, 0}, 0.01), std::invalid_argument);
}
