#include <doctest.h>

#include "fixtures.hpp"
#include "qrate/network.hpp"

using namespace qrate;
using namespace fixtures;

TEST_CASE("jump directions: processor sharing has +/- e_i") {
    auto dirs = jump_directions(p2());
    REQUIRE(dirs.size() == 4);
    CHECK(std::count_if(dirs.begin(), dirs.end(), [](auto& d) { return d.is_arrival(); }) == 2);
    CHECK(std::count_if(dirs.begin(), dirs.end(), [](auto& d) { return d.is_exit(); }) == 2);
    CHECK(std::is_sorted(dirs.begin(), dirs.end()));
}

TEST_CASE("jump directions: J2 has arrivals, exits and both routes") {
    auto dirs = jump_directions(j2());
    REQUIRE(dirs.size() == 6);
    CHECK(std::count_if(dirs.begin(), dirs.end(), [](auto& d) { return d.is_route(); }) == 2);
}

TEST_CASE("jump directions: dead rates excluded") {
    JacksonSpec j;
    j.N = 2;
    j.a = {1.0, 0.0};
    j.sigma = {1.0, 1.0};
    j.routing = Mat(2, 3);
    j.routing(0, 0) = 0.5;
    j.routing(0, 2) = 0.5;
    j.routing(1, 0) = 0.0;
    j.routing(1, 1) = 1.0;
    auto dirs = jump_directions(NetworkSpec{j});
    // e_2 excluded (a_2 = 0), -e_2 excluded (p_{2,0} = 0)
    CHECK(std::count(dirs.begin(), dirs.end(), JumpDirection::plus_e(1, 2)) == 0);
    CHECK(std::count(dirs.begin(), dirs.end(), JumpDirection::minus_e(1, 2)) == 0);
    CHECK(std::count(dirs.begin(), dirs.end(), JumpDirection::plus_e(0, 2)) == 1);
}

TEST_CASE("intensity: processor sharing reallocates idle capacity") {
    auto spec = p2();
    CHECK(intensity(spec, {0, 5}, JumpDirection::minus_e(1, 2)) == doctest::Approx(3.0));
    CHECK(intensity(spec, {4, 5}, JumpDirection::minus_e(1, 2)) == doctest::Approx(1.5));
    CHECK(intensity(spec, {0, 5}, JumpDirection::minus_e(0, 2)) == 0.0);
}

TEST_CASE("intensity: idle server blocks routing") {
    auto spec = j2();
    CHECK(intensity(spec, {0, 1}, JumpDirection::route(0, 1, 2)) == 0.0);
    CHECK(intensity(spec, {1, 1}, JumpDirection::route(0, 1, 2)) == doctest::Approx(0.5));
}

TEST_CASE("intensity rejects states outside the orthant") {
    CHECK_THROWS_AS(intensity(j2(), {-1, 0}, JumpDirection::plus_e(0, 2)), std::invalid_argument);
}

TEST_CASE("facet_index") {
    Vec x{0.0, 2.5, 0.0};
    CHECK(facet_index(x, full_mask(3)) == (1u | 4u));
    CHECK(facet_index(Vec{1.0, 2.0}, full_mask(2)) == 0u);
    CHECK(facet_index(StateVec{0, 0}, full_mask(2)) == 3u);
}

TEST_CASE("validate reports parameter violations") {
    ProcessorSharingSpec p;
    p.N = 2;
    p.a = {1, 1};
    p.sigma = {3, 3};
    p.f = {0.6, 0.6};
    auto rep = validate(NetworkSpec{p});
    REQUIRE(!rep.ok());
    bool found = false;
    for (auto& v : rep.violations)
        if (v.find("f does not sum") != std::string::npos) found = true;
    CHECK(found);

    JacksonSpec j = j2().jackson();
    j.routing(0, 0) = 0.0;
    j.routing(0, 2) = 1.0;
    j.routing(1, 0) = 0.0;
    j.routing(1, 1) = 1.0;
    auto rep2 = validate(NetworkSpec{j});
    REQUIRE(!rep2.ok());
    bool exit_missing = false;
    for (auto& v : rep2.violations)
        if (v.find("no exit") != std::string::npos) exit_missing = true;
    CHECK(exit_missing);

    CHECK(validate(j2()).ok());
    CHECK(validate(j3()).ok());
    CHECK(validate(p2()).ok());
}

TEST_CASE("validate: reducible routing flagged") {
    JacksonSpec j;
    j.N = 2;
    j.a = {1.0, 1.0};
    j.sigma = {1.0, 1.0};
    j.routing = Mat(2, 3);
    j.routing(0, 0) = 0.5;
    j.routing(0, 2) = 0.5;  // 1 -> 2
    j.routing(1, 0) = 1.0;  // no 2 -> 1
    auto rep = validate(NetworkSpec{j});
    REQUIRE(!rep.ok());
    bool irr = false;
    for (auto& v : rep.violations)
        if (v.find("irreducib") != std::string::npos) irr = true;
    CHECK(irr);
}

TEST_CASE("communication: PS coordinate moves") {
    auto r = check_communication(p2(), {2, 0}, {0, 3});
    CHECK(r.reachable);
    CHECK(r.steps == 5);
}

TEST_CASE("communication: trivial and routed cases") {
    auto r0 = check_communication(j2(), {1, 1}, {1, 1});
    CHECK(r0.reachable);
    CHECK(r0.steps == 0);
    auto r1 = check_communication(j2(), {1, 0}, {0, 1});
    CHECK(r1.reachable);
    CHECK(r1.steps <= 6);
}

TEST_CASE("communication holds across the [0,5]^N box") {
    for (auto spec : {j2(), p2()}) {
        for (int x1 = 0; x1 <= 5; ++x1)
            for (int x2 = 0; x2 <= 5; ++x2)
                for (int y1 = 0; y1 <= 5; ++y1)
                    for (int y2 = 0; y2 <= 5; ++y2) {
                        auto r = check_communication(spec, {x1, x2}, {y1, y2});
                        REQUIRE(r.reachable);
                        long l1 = std::abs(x1 - y1) + std::abs(x2 - y2);
                        REQUIRE(r.steps <= 3 * l1);
                    }
    }
}

TEST_CASE("rates constant per facet and radially homogeneous") {
    for (auto spec : {j2(), j3(), p2()}) {
        auto dirs = jump_directions(spec);
        const int n = spec.size();
        for (IndexMask m = 0; m <= full_mask(n); ++m) {
            StateVec x1(n), x2(n), x2x(n);
            for (int i = 0; i < n; ++i) {
                bool on = (m & (1u << i)) != 0;
                x1[i] = on ? 0 : 1;
                x2[i] = on ? 0 : 5;
                x2x[i] = 2 * x2[i];
            }
            for (const auto& v : dirs) {
                CHECK(intensity(spec, x1, v) == doctest::Approx(intensity(spec, x2, v)));
                CHECK(intensity(spec, x2, v) == doctest::Approx(intensity(spec, x2x, v)));
            }
        }
    }
}

TEST_CASE("PS service rates: single busy class gets full capacity") {
    auto spec = p2();
    const auto& ps = spec.ps();
    // only class 1 busy
    CHECK(intensity(spec, {3, 0}, JumpDirection::minus_e(0, 2)) == doctest::Approx(ps.sigma[0]));
    // both busy: rates sum to sum of sigma_i f_i
    double total = intensity(spec, {3, 3}, JumpDirection::minus_e(0, 2)) +
                   intensity(spec, {3, 3}, JumpDirection::minus_e(1, 2));
    CHECK(total == doctest::Approx(ps.sigma[0] * ps.f[0] + ps.sigma[1] * ps.f[1]));
}

TEST_CASE("direction names round-trip") {
    for (auto spec : {j2(), p2(), j3()}) {
        for (const auto& d : jump_directions(spec)) {
            auto parsed = JumpDirection::parse(d.name(), spec.size());
            REQUIRE(parsed.has_value());
            CHECK(*parsed == d);
        }
    }
}
