#ifndef QRATE_TEST_FIXTURES_HPP
#define QRATE_TEST_FIXTURES_HPP

#include "qrate/network.hpp"
#include "qrate/rng.hpp"

namespace fixtures {

using namespace qrate;

inline NetworkSpec jackson1(double a, double sigma) {
    JacksonSpec j;
    j.N = 1;
    j.a = {a};
    j.sigma = {sigma};
    j.routing = Mat(1, 2);
    j.routing(0, 0) = 1.0;
    j.routing(0, 1) = 0.0;
    return NetworkSpec{j};
}

inline NetworkSpec j1() { return jackson1(4.0, 1.0); }
inline NetworkSpec j1s() { return jackson1(1.0, 4.0); }

inline NetworkSpec jackson2(double a) {
    JacksonSpec j;
    j.N = 2;
    j.a = {a, a};
    j.sigma = {1.0, 1.0};
    j.routing = Mat(2, 3);
    j.routing(0, 0) = 0.5;
    j.routing(0, 2) = 0.5;
    j.routing(1, 0) = 0.5;
    j.routing(1, 1) = 0.5;
    return NetworkSpec{j};
}

inline NetworkSpec j2() { return jackson2(0.3); }
inline NetworkSpec j2u() { return jackson2(2.0); }

inline NetworkSpec j3() {
    JacksonSpec j;
    j.N = 3;
    j.a = {1.0, 0.5, 0.2};
    j.sigma = {2.0, 1.5, 1.0};
    j.routing = Mat(3, 4);
    double rows[3][4] = {{0.3, 0.0, 0.4, 0.3}, {0.2, 0.3, 0.0, 0.5}, {0.5, 0.25, 0.25, 0.0}};
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 4; ++c) j.routing(i, c) = rows[i][c];
    return NetworkSpec{j};
}

inline NetworkSpec ps2(double a) {
    ProcessorSharingSpec p;
    p.N = 2;
    p.a = {a, a};
    p.sigma = {3.0, 3.0};
    p.f = {0.5, 0.5};
    return NetworkSpec{p};
}

inline NetworkSpec p2() { return ps2(1.0); }
inline NetworkSpec p2u() { return ps2(2.0); }

// small deterministic RNG for property tests
struct TestRng {
    std::uint64_t state;
    explicit TestRng(std::uint64_t seed) : state(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        state = rng::mix64(state);
        return lo + (hi - lo) * rng::uniform01(state);
    }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(uniform(0.0, static_cast<double>(hi - lo) + 0.999999));
    }
};

}  // namespace fixtures

#endif
