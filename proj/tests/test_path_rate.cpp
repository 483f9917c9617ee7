#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "qrate/path_rate.hpp"

using namespace qrate;
using namespace fixtures;

TEST_CASE("LLN path costs nothing until absorption") {
    // J1s drifts at -3; ride the drift to the boundary, then sit there
    PiecewisePath phi;
    phi.times = {0.0, 1.0 / 3.0, 1.0};
    phi.values = {{1.0}, {0.0}, {0.0}};
    CHECK(path_rate(j1s(), phi) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("kinked drain path: half interior cost, free boundary") {
    PiecewisePath phi;
    phi.times = {0.0, 0.5, 1.0};
    phi.values = {{1.0}, {0.0}, {0.0}};
    // interior slope -2 for J1s: stationarity root of x^2 + 2x - 4 = 0
    double x = -1.0 + std::sqrt(5.0);
    double l_int = -2.0 * std::log(x) - (x - 1.0) - 4.0 * (1.0 / x - 1.0);
    double expect = 0.5 * l_int;
    CHECK(expect == doctest::Approx(0.051985).epsilon(1e-3));
    CHECK(path_rate(j1s(), phi) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("staying at the origin pays the boundary rate") {
    PiecewisePath phi;
    phi.times = {0.0, 1.0};
    phi.values = {{0.0}, {0.0}};
    CHECK(path_rate(j1(), phi) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("segments are refined at interior zero crossings") {
    // single segment dipping to zero at t = 1/3 and climbing back
    PiecewisePath phi;
    phi.times = {0.0, 1.0};
    phi.values = {{1.0}, {-0.0}};
    phi.values[1][0] = 0.0;
    auto res = path_rate_detailed(j1s(), phi);
    CHECK(res.segments.size() == 1);

    PiecewisePath vee;
    vee.times = {0.0, 1.0 / 3.0, 1.0};
    vee.values = {{1.0}, {0.0}, {2.0}};
    auto rv = path_rate_detailed(j1s(), vee);
    CHECK(rv.segments.size() == 2);
    CHECK(std::isfinite(rv.value));
}

TEST_CASE("paths leaving the orthant are rejected") {
    PiecewisePath phi;
    phi.times = {0.0, 1.0};
    phi.values = {{1.0}, {-0.5}};
    CHECK_THROWS_AS(path_rate(j1(), phi), std::invalid_argument);
}

TEST_CASE("upward boundary departure needs a matching slope") {
    // beta_1 > 0 while the path sits on {x_1 = 0} is inadmissible localization,
    // but a path leaving 0 linearly is charged the interior rate
    PiecewisePath phi;
    phi.times = {0.0, 1.0};
    phi.values = {{0.0}, {1.0}};
    auto res = path_rate_detailed(j1(), phi);
    CHECK(res.segments.size() == 1);
    CHECK(std::isfinite(res.value));
    // slope +1 in the interior of J1 (drift +3): finite positive cost
    CHECK(res.value > 0.0);
}

TEST_CASE("two-dimensional path with a boundary stretch") {
    auto spec = j2();
    // the reflected fluid drift on the {x_1 = 0} face: tau_1 = 0.8 balances
    // coordinate 1 and leaves coordinate 2 draining at -0.3
    auto face = local_rate(spec, 1u, Vec{0.0, -0.3});
    REQUIRE(face.status == SolveStatus::zero);

    PiecewisePath phi;
    phi.times = {0.0, 0.5, 1.0};
    phi.values = {{0.4, 0.35}, {0.0, 0.2}, {0.0, 0.05}};
    auto res = path_rate_detailed(spec, phi);
    REQUIRE(res.segments.size() == 2);
    CHECK(res.segments[0].facet == 0u);
    CHECK(res.segments[1].facet == 1u);
    CHECK(std::isfinite(res.value));
    CHECK(res.segments[1].local_rate == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(res.value == doctest::Approx(0.5 * res.segments[0].local_rate).epsilon(1e-12));
}
