#include <doctest.h>

#include <cmath>

#include "qrate/linalg.hpp"

using namespace qrate;

TEST_CASE("solve_dense and inverse") {
    Mat m(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = -0.5;
    m(1, 0) = -0.5;
    m(1, 1) = 1.0;
    Vec x;
    REQUIRE(solve_dense(m, Vec{0.3, 0.3}, x));
    CHECK(x[0] == doctest::Approx(0.6));
    CHECK(x[1] == doctest::Approx(0.6));

    auto inv = inverse(m);
    auto id = matmul(m, inv);
    CHECK(id(0, 0) == doctest::Approx(1.0));
    CHECK(id(0, 1) == doctest::Approx(0.0));

    Mat sing(2, 2);
    sing(0, 0) = 1.0;
    sing(0, 1) = 2.0;
    sing(1, 0) = 2.0;
    sing(1, 1) = 4.0;
    CHECK(!solve_dense(sing, Vec{1.0, 1.0}, x));
}

TEST_CASE("spectral radius on awkward nonnegative matrices") {
    Mat zero(3, 3);
    CHECK(spectral_radius_nonneg(zero) == 0.0);

    Mat perm(2, 2);  // periodic: plain power iteration would oscillate
    perm(0, 1) = 1.0;
    perm(1, 0) = 1.0;
    CHECK(spectral_radius_nonneg(perm) == doctest::Approx(1.0).epsilon(1e-10));

    Mat jordan(2, 2);  // defective dominant eigenvalue
    jordan(0, 0) = 0.5;
    jordan(0, 1) = 1.0;
    jordan(1, 1) = 0.5;
    CHECK(spectral_radius_nonneg(jordan) == doctest::Approx(0.5).epsilon(1e-9));

    Mat stoch(2, 2);
    stoch(0, 0) = 0.2;
    stoch(0, 1) = 0.3;
    stoch(1, 0) = 0.4;
    stoch(1, 1) = 0.1;
    // Perron root of [[.2,.3],[.4,.1]]: (0.3 + sqrt(0.01 + 4*0.12))/2
    double expect = (0.3 + std::sqrt(0.01 + 0.48)) / 2.0;
    CHECK(spectral_radius_nonneg(stoch) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("simplex projection") {
    auto p = project_simplex(Vec{0.5, 0.5});
    CHECK(p[0] == doctest::Approx(0.5));
    auto q = project_simplex(Vec{2.0, 0.0});
    CHECK(q[0] == doctest::Approx(1.0));
    CHECK(q[1] == doctest::Approx(0.0));
    auto r = project_simplex(Vec{-1.0, -1.0, 5.0});
    CHECK(r[2] == doctest::Approx(1.0));
    auto s = project_simplex(Vec{0.4, 0.4, 0.4});
    double tot = s[0] + s[1] + s[2];
    CHECK(tot == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("nnls on small cones") {
    std::vector<Vec> cols{{1.0, 0.0}, {0.0, 1.0}};
    auto r = nnls_enumerate(cols, Vec{0.3, 0.7});
    CHECK(r.residual <= 1e-12);
    CHECK(r.alpha[0] == doctest::Approx(0.3));

    // target outside the cone
    auto neg = nnls_enumerate(cols, Vec{-1.0, 0.0});
    CHECK(neg.residual == doctest::Approx(1.0));

    // linearly dependent columns still resolve
    std::vector<Vec> dep{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    auto d = nnls_enumerate(dep, Vec{2.0, 1.0});
    CHECK(d.residual <= 1e-9);
}

TEST_CASE("pairwise sum is order-stable and exact on integers") {
    Vec v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 7);
    double expect = 0.0;
    for (double x : v) expect += x;
    CHECK(pairwise_sum(v) == expect);
    CHECK(pairwise_sum(Vec{}) == 0.0);
    CHECK(pairwise_sum(Vec{3.5}) == 3.5);
}

TEST_CASE("orthonormal basis drops dependent vectors") {
    std::vector<Vec> vecs{{1.0, 0.0}, {-1.0, 0.0}, {1.0, 1.0}};
    auto basis = orthonormal_basis(vecs);
    REQUIRE(basis.size() == 2);
    CHECK(std::fabs(dot(basis[0], basis[1])) <= 1e-12);
    Vec off{0.0, 0.0};
    auto proj = project_onto_span(basis, Vec{0.3, -0.4});
    CHECK(norm2(proj - Vec{0.3, -0.4}) <= 1e-12);
}
