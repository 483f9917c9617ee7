#include <doctest.h>

#include <cmath>
#include <functional>

#include "fixtures.hpp"
#include "qrate/rate_solver.hpp"

using namespace qrate;
using namespace fixtures;

TEST_CASE("ell") {
    CHECK(ell(1.0) == 0.0);
    CHECK(ell(0.0) == 1.0);
    CHECK(ell(2.0) == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-15));
    CHECK(std::isinf(ell(-0.5)));
}

TEST_CASE("inner dual solve: drift point costs nothing") {
    std::vector<JumpDirection> dirs{JumpDirection::minus_e(0, 1), JumpDirection::plus_e(0, 1)};
    auto r = inner_dual_solve(dirs, {1.0, 4.0}, Vec{3.0});
    CHECK(r.status == SolveStatus::zero);
    CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.c[0] == doctest::Approx(1.0));
    CHECK(r.c[1] == doctest::Approx(1.0));
}

TEST_CASE("inner dual solve: M/M/1 at rest") {
    std::vector<JumpDirection> dirs{JumpDirection::minus_e(0, 1), JumpDirection::plus_e(0, 1)};
    auto r = inner_dual_solve(dirs, {1.0, 4.0}, Vec{0.0});
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.c[1] == doctest::Approx(0.5).epsilon(1e-9));  // e^lambda
    CHECK(r.c[0] == doctest::Approx(2.0).epsilon(1e-9));  // e^-lambda
}

TEST_CASE("inner dual solve: steep drain") {
    std::vector<JumpDirection> dirs{JumpDirection::minus_e(0, 1), JumpDirection::plus_e(0, 1)};
    auto r = inner_dual_solve(dirs, {1.0, 4.0}, Vec{-3.0});
    CHECK(r.value == doctest::Approx(3.0 * std::log(4.0)).epsilon(1e-10));
    CHECK(r.c[1] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("inner dual solve: unattainable velocities are infinite") {
    std::vector<JumpDirection> dirs{JumpDirection::plus_e(0, 2)};
    // beta outside the span of the alive directions
    auto r = inner_dual_solve(dirs, {2.0}, Vec{0.0, 1.0});
    CHECK(r.status == SolveStatus::infinite);
    // beta opposing the only direction
    auto r2 = inner_dual_solve(dirs, {2.0}, Vec{-1.0, 0.0});
    CHECK(r2.status == SolveStatus::infinite);
    // no alive directions at all
    auto r3 = inner_dual_solve(dirs, {0.0}, Vec{0.0, 0.0});
    CHECK(r3.value == 0.0);
}

TEST_CASE("primal feasibility at the inner optimum") {
    auto spec = j2u();
    auto model = localize(spec, 3u);
    TestRng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> w(model.directions().size());
        for (auto& x : w) x = rng.uniform(0.05, 3.0);
        Vec beta{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        auto r = inner_dual_solve(model.directions(), w, beta);
        REQUIRE(r.status != SolveStatus::infinite);
        Vec attained(2, 0.0);
        for (std::size_t d = 0; d < w.size(); ++d)
            axpy(w[d] * r.c[d], model.directions()[d].as_vec(), attained);
        CHECK(norm_inf(attained - beta) <= 1e-10 * (1.0 + norm_inf(beta)));
        for (std::size_t d = 0; d < w.size(); ++d)
            CHECK(r.c[d] == doctest::Approx(std::exp(dot(r.lambda, model.directions()[d].as_vec())))
                              .epsilon(1e-9));
    }
}

TEST_CASE("M/M/1 closed form (sqrt a - sqrt sigma)^2") {
    for (auto [a, s] : std::vector<std::pair<double, double>>{{4, 1}, {9, 1}, {2, 1}}) {
        auto sol = local_rate_jackson(jackson1(a, s).jackson(), 1u, Vec{0.0});
        double expect = (std::sqrt(a) - std::sqrt(s)) * (std::sqrt(a) - std::sqrt(s));
        CHECK(sol.value == doctest::Approx(expect).epsilon(1e-8));
    }
}

TEST_CASE("J1 at the origin: value, occupancy and tilts") {
    auto sol = local_rate_jackson(j1().jackson(), 1u, Vec{0.0});
    CHECK(sol.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.occupancy.tau[0] == doctest::Approx(1.0).epsilon(1e-6));
    int dp = 1, dm = 0;  // lexicographic: -e1 < +e1
    CHECK(sol.c[dp] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(sol.c[dm] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("stable M/M/1 at the origin costs nothing") {
    auto sol = local_rate_jackson(j1s().jackson(), 1u, Vec{0.0});
    CHECK(sol.status == SolveStatus::zero);
    CHECK(sol.value <= 1e-10);
    CHECK(sol.occupancy.tau[0] == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("J2u at the origin") {
    auto sol = local_rate_jackson(j2u().jackson(), 3u, Vec{0.0, 0.0});
    CHECK(sol.value == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.occupancy.tau[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.occupancy.tau[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("J2 at the origin is stable: zero cost at tau = (0.6, 0.6)") {
    auto sol = local_rate_jackson(j2().jackson(), 3u, Vec{0.0, 0.0});
    CHECK(sol.status == SolveStatus::zero);
    CHECK(sol.occupancy.tau[0] == doctest::Approx(0.6).epsilon(1e-5));
    CHECK(sol.occupancy.tau[1] == doctest::Approx(0.6).epsilon(1e-5));
}

TEST_CASE("PS: LLN drift costs nothing on the interior model") {
    auto sol = local_rate_ps(p2().ps(), 0u, Vec{-0.5, -0.5});
    CHECK(sol.status == SolveStatus::zero);
    CHECK(sol.value <= 1e-12);
}

TEST_CASE("P2u at the origin: symmetric closed form") {
    auto sol = local_rate_ps(p2u().ps(), 3u, Vec{0.0, 0.0});
    double expect = 2.0 * std::pow(std::sqrt(2.0) - std::sqrt(1.5), 2);
    CHECK(sol.value == doctest::Approx(expect).epsilon(1e-7));
    CHECK(sol.occupancy.tau[0] == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(sol.occupancy.tau[1] == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("beta off the facet subspace is infinite") {
    CHECK(local_rate_jackson(j2().jackson(), 3u, Vec{0.1, 0.0}).status == SolveStatus::infinite);
    CHECK(local_rate_ps(p2().ps(), 1u, Vec{0.1, 0.0}).status == SolveStatus::infinite);
}

TEST_CASE("rho_from_tau product form") {
    auto rho = rho_from_tau(Vec{0.6, 0.6});
    CHECK(rho[0] == doctest::Approx(0.36));
    CHECK(rho[1] == doctest::Approx(0.24));
    CHECK(rho[2] == doctest::Approx(0.24));
    CHECK(rho[3] == doctest::Approx(0.16));

    auto r1 = rho_from_tau(Vec{1.0, 1.0});
    CHECK(r1[0] == 1.0);
    auto r0 = rho_from_tau(Vec{0.0, 0.0});
    CHECK(r0[3] == 1.0);
}

TEST_CASE("rho_from_tau: tau extraction is the exact inverse") {
    TestRng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t kk = static_cast<std::size_t>(rng.uniform_int(1, 4));
        Vec tau(kk);
        for (auto& t : tau) t = rng.uniform(0.0, 1.0);
        auto rho = rho_from_tau(tau);
        double total = 0.0;
        for (double r : rho) total += r;
        CHECK(std::fabs(total - 1.0) <= 1e-15 * rho.size());
        for (std::size_t b = 0; b < kk; ++b) {
            double agg = 0.0;
            for (std::size_t m = 0; m < rho.size(); ++m)
                if (!(m & (std::size_t{1} << b))) agg += rho[m];
            CHECK(agg == doctest::Approx(tau[b]).epsilon(1e-13));
        }
    }
}

TEST_CASE("rbar_from: interior occupancy returns interior rates, arrivals always fixed") {
    auto model = localize(p2(), 1u);
    Vec rho{1.0, 0.0};
    auto rbar = rbar_from(model, rho);
    for (std::size_t d = 0; d < rbar.size(); ++d)
        CHECK(rbar[d] == doctest::Approx(model.interior_rates()[d]));

    Vec mix{0.5, 0.5};
    auto rb = rbar_from(model, mix);
    int dm2 = model.direction_index(JumpDirection::minus_e(1, 2));
    CHECK(rb[dm2] == doctest::Approx(2.25));
    for (std::size_t d = 0; d < rb.size(); ++d)
        if (model.directions()[d].is_arrival())
            CHECK(rb[d] == doctest::Approx(p2().ps().a[model.directions()[d].pos_index()]));
}

TEST_CASE("L_point dispatches on the active facet") {
    auto spec = j1();
    CHECK(L_point(spec, Vec{2.0}, Vec{-3.0}) == doctest::Approx(3.0 * std::log(4.0)).epsilon(1e-9));
    CHECK(std::isinf(L_point(spec, Vec{0.0}, Vec{1.0})));
    CHECK(L_point(spec, Vec{0.0}, Vec{0.0}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("jensen gap: equality cases and the inequality") {
    auto model = localize(j2(), 3u);
    const std::size_t nf = model.facet_count(), nd = model.directions().size();

    auto u_from = [&](const std::function<double(std::size_t, std::size_t)>& mult) {
        std::vector<std::vector<double>> u(nf, std::vector<double>(nd, 0.0));
        for (std::size_t m = 0; m < nf; ++m)
            for (std::size_t d = 0; d < nd; ++d)
                u[m][d] = mult(m, d) * model.facet_rates_local(static_cast<int>(m))[d];
        return u;
    };

    Vec rho{0.4, 0.3, 0.2, 0.1};
    auto g0 = jensen_gap(model, rho, u_from([](std::size_t, std::size_t) { return 1.0; }));
    CHECK(g0.lhs == doctest::Approx(0.0));
    CHECK(g0.rhs == doctest::Approx(0.0));

    auto g1 = jensen_gap(model, rho, u_from([](std::size_t, std::size_t d) { return 0.3 + 0.2 * d; }));
    CHECK(g1.lhs == doctest::Approx(g1.rhs).epsilon(1e-12));

    TestRng rng(3);
    int strict = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Vec r(nf);
        double tot = 0.0;
        for (auto& x : r) tot += (x = rng.uniform(0.01, 1.0));
        for (auto& x : r) x /= tot;
        auto u = u_from([&](std::size_t, std::size_t) { return rng.uniform(0.0, 3.0); });
        auto g = jensen_gap(model, r, u);
        REQUIRE(g.lhs >= g.rhs - 1e-12);
        if (g.lhs > g.rhs + 1e-9) ++strict;
    }
    CHECK(strict > 900);  // facet-dependent controls are almost surely strictly worse
}

TEST_CASE("jensen gap rejects controls on dead directions") {
    auto model = localize(j2(), 3u);
    std::vector<std::vector<double>> u(model.facet_count(),
                                       std::vector<double>(model.directions().size(), 0.0));
    // facet {1,2} has zero service rates; a positive control there is illegal
    int dm = model.direction_index(JumpDirection::minus_e(0, 2));
    u[model.local_facet(3u)][dm] = 1.0;
    Vec rho(model.facet_count(), 1.0 / model.facet_count());
    CHECK_THROWS_AS(jensen_gap(model, rho, u), std::invalid_argument);
}

namespace {

RateSolution make_solution(const LocalModel& model, IndexMask k, const Vec& tau_k, const Vec& beta,
                           const std::function<double(const JumpDirection&)>& tilt) {
    RateSolution sol;
    sol.beta = beta;
    sol.occupancy.K = k;
    sol.occupancy.rho = rho_from_tau(tau_k);
    sol.occupancy.tau.assign(model.dimension(), 1.0);
    for (std::size_t b = 0; b < model.k_indices().size(); ++b)
        sol.occupancy.tau[model.k_indices()[b]] = tau_k[b];
    sol.rbar = rbar_from(model, sol.occupancy.rho);
    sol.c = TiltVector::ones(model.directions().size());
    for (std::size_t d = 0; d < model.directions().size(); ++d) sol.c[d] = tilt(model.directions()[d]);
    sol.status = SolveStatus::finite;
    sol.value = 0.0;
    // sanity: the constructed occupancies and tilts really realize beta
    Vec drift(model.dimension(), 0.0);
    for (std::size_t d = 0; d < model.directions().size(); ++d)
        axpy(sol.c[d] * sol.rbar[d], model.directions()[d].as_vec(), drift);
    REQUIRE(norm_inf(drift - beta) <= 1e-12);
    return sol;
}

}  // namespace

TEST_CASE("perturb_positive: strictly positive input converges to itself") {
    auto model = localize(j2(), 3u);
    auto sol = local_rate_jackson(j2().jackson(), 3u, Vec{0.0, 0.0});
    double prev_gap = kInf;
    for (double kappa : {1e-1, 1e-2, 1e-3, 1e-4}) {
        auto p = perturb_positive(model, sol, kappa);
        double gap = 0.0;
        for (std::size_t d = 0; d < p.c.size(); ++d)
            gap = std::max(gap, std::fabs(p.c[d] - sol.c[d]));
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(prev_gap <= 1e-3);
}

TEST_CASE("perturb_positive: Jackson with dead routes and an idle node") {
    auto model = localize(j2(), 3u);
    // c_routes = 0, c+- = 1 at tau = (0.6, 0.6) keeps beta = 0
    auto dead_routes = make_solution(model, 3u, Vec{0.6, 0.6}, Vec{0.0, 0.0},
                                     [](const JumpDirection& v) { return v.is_route() ? 0.0 : 1.0; });
    double prev = kInf;
    for (double kappa : {1e-1, 1e-2, 1e-3, 1e-4}) {
        auto p = perturb_positive(model, dead_routes, kappa);
        for (double cv : p.c.c) REQUIRE(cv > 0.0);
        Vec drift(2, 0.0);
        for (std::size_t d = 0; d < p.c.size(); ++d)
            axpy(p.c[d] * p.rbar[d], model.directions()[d].as_vec(), drift);
        REQUIRE(norm_inf(drift) <= 1e-9);
        double gap = 0.0;
        for (std::size_t d = 0; d < p.c.size(); ++d)
            if (p.rbar[d] > 0.0) gap = std::max(gap, std::fabs(p.c[d] - dead_routes.c[d]));
        CHECK(gap <= prev + 1e-12);
        prev = gap;
    }

    // tau_1 = 0 with node-1 arrivals suppressed; c_{2>1} must vanish too
    auto idle_node = make_solution(model, 3u, Vec{0.0, 0.6}, Vec{0.0, 0.0},
                                   [](const JumpDirection& v) {
                                       if (v.is_arrival() && v.pos_index() == 0) return 0.0;
                                       if (v.is_route() && v.neg_index() == 1) return 0.0;
                                       return 1.0;
                                   });
    for (double kappa : {1e-2, 1e-3}) {
        auto p = perturb_positive(model, idle_node, kappa);
        for (double cv : p.c.c) REQUIRE(cv > 0.0);
        Vec drift(2, 0.0);
        for (std::size_t d = 0; d < p.c.size(); ++d)
            axpy(p.c[d] * p.rbar[d], model.directions()[d].as_vec(), drift);
        REQUIRE(norm_inf(drift) <= 1e-9);
        // multipliers on dead averaged rates stay bounded as kappa -> 0
        for (std::size_t d = 0; d < p.c.size(); ++d) CHECK(p.c[d] <= 10.0);
    }
}

TEST_CASE("perturb_positive: PS occupancy shift") {
    auto model = localize(p2(), 1u);
    RateSolution sol;
    sol.beta = Vec{0.0, -2.0};
    sol.occupancy.K = 1u;
    sol.occupancy.rho = Vec{0.0, 1.0};  // no interior mass
    sol.occupancy.tau = Vec{0.0, 3.0};
    sol.rbar = rbar_from(model, sol.occupancy.rho);
    sol.c = TiltVector::ones(model.directions().size());
    sol.c[model.direction_index(JumpDirection::plus_e(0, 2))] = 0.0;  // forced by beta_1 = 0
    sol.status = SolveStatus::finite;
    sol.value = 0.0;

    auto p = perturb_positive(model, sol, 0.01);
    CHECK(p.occupancy.rho[0] == doctest::Approx(0.01));
    for (double cv : p.c.c) CHECK(cv > 0.0);
    Vec drift(2, 0.0);
    for (std::size_t d = 0; d < p.c.size(); ++d)
        axpy(p.c[d] * p.rbar[d], model.directions()[d].as_vec(), drift);
    CHECK(norm_inf(drift - sol.beta) <= 1e-9);

    CHECK_THROWS_AS(perturb_positive(model, sol, 1.5), std::invalid_argument);
}

TEST_CASE("averaged-rate continuity: identical velocities give zero deviation") {
    auto ones_j = TiltVector::ones(jump_directions(j2()).size());
    auto r = averaged_rate_continuity(j2(), 3u, ones_j, Vec{0.0, 0.0}, Vec{0.0, 0.0});
    CHECK(r.max_deviation == doctest::Approx(0.0));
    CHECK(r.within);

    auto ones_p = TiltVector::ones(jump_directions(p2()).size());
    auto rp = averaged_rate_continuity(p2(), 3u, ones_p, Vec{0.0, 0.0}, Vec{0.0, 0.0});
    CHECK(rp.max_deviation == doctest::Approx(0.0));
    CHECK(rp.within);
}

TEST_CASE("averaged-rate continuity: Lipschitz bound respected on random pairs") {
    TestRng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        auto spec = trial % 2 == 0 ? j2() : p2();
        auto dirs = jump_directions(spec);
        TiltVector c = TiltVector::ones(dirs.size());
        for (auto& cv : c.c) cv = rng.uniform(0.3, 3.0);
        Vec beta{0.0, rng.uniform(-1.0, 1.0)};
        Vec beta_p{0.0, rng.uniform(-1.0, 1.0)};
        auto r = averaged_rate_continuity(spec, 1u, c, beta, beta_p);
        CHECK(r.within);
    }
}

TEST_CASE("rate solutions satisfy the velocity constraint and dual link") {
    TestRng rng(23);
    for (auto spec : {j2(), j2u()}) {
        auto dirs = jump_directions(spec);
        for (int trial = 0; trial < 10; ++trial) {
            Vec beta{0.0, rng.uniform(-0.8, 0.8)};
            auto sol = local_rate(spec, 1u, beta);
            REQUIRE(sol.status != SolveStatus::infinite);
            Vec drift(2, 0.0);
            for (std::size_t d = 0; d < dirs.size(); ++d)
                axpy(sol.c[d] * sol.rbar[d], dirs[d].as_vec(), drift);
            CHECK(norm_inf(drift - beta) <= 1e-9);
            for (std::size_t d = 0; d < dirs.size(); ++d)
                if (sol.rbar[d] > 1e-12)
                    CHECK(sol.c[d] ==
                          doctest::Approx(std::exp(dot(sol.lambda, dirs[d].as_vec()))).epsilon(1e-7));
        }
    }
}

TEST_CASE("the solver lower-bounds every facet-resolved control") {
    // sample occupancies rho and controls u_{I,v} with sum rho_I u_{I,v} v = 0
    // exactly; the facet-resolved running cost must dominate L(0)
    TestRng rng(2718);
    for (auto spec : {j2(), p2()}) {
        auto model = localize(spec, full_mask(spec.size()));
        const std::size_t nf = model.facet_count(), nd = model.directions().size();
        double l0 = local_rate(spec, full_mask(spec.size()), Vec(spec.size(), 0.0)).value;
        REQUIRE(std::isfinite(l0));
        int produced = 0;
        for (int trial = 0; trial < 400 && produced < 100; ++trial) {
            Vec rho(nf);
            double tot = 0.0;
            for (auto& x : rho) tot += (x = rng.uniform(0.05, 1.0));
            for (auto& x : rho) x /= tot;
            auto rbar = rbar_from(model, rho);

            // balance a unit tilt by absorbing the drift into the services
            Vec cbase(nd, 1.0);
            Vec drift(spec.size(), 0.0);
            for (std::size_t d = 0; d < nd; ++d) axpy(rbar[d], model.directions()[d].as_vec(), drift);
            bool ok = true;
            for (std::size_t d = 0; d < nd; ++d) {
                const auto& v = model.directions()[d];
                if (!v.is_exit()) continue;
                int i = v.neg_index();
                if (rbar[d] <= 1e-9) { ok = false; break; }
                cbase[d] = 1.0 + drift[i] / rbar[d];
                if (cbase[d] < 0.0) ok = false;
            }
            if (!ok) continue;

            // facet-dependent noise with zero rho-weighted mean per direction
            std::vector<std::vector<double>> u(nf, std::vector<double>(nd, 0.0));
            for (std::size_t d = 0; d < nd; ++d) {
                Vec gI(nf);
                double mean = 0.0;
                for (std::size_t m = 0; m < nf; ++m) {
                    gI[m] = rng.uniform(-0.3, 0.3);
                    mean += rho[m] * model.facet_rates_local(static_cast<int>(m))[d] * gI[m];
                }
                if (rbar[d] > 0.0) mean /= rbar[d];
                for (std::size_t m = 0; m < nf; ++m) {
                    double r = model.facet_rates_local(static_cast<int>(m))[d];
                    double mult = std::max(0.0, cbase[d] + (r > 0.0 ? gI[m] - mean : 0.0));
                    u[m][d] = mult * r;
                }
            }
            // recompute the exact velocity; keep only exactly balanced samples
            Vec vel(spec.size(), 0.0);
            for (std::size_t m = 0; m < nf; ++m)
                for (std::size_t d = 0; d < nd; ++d)
                    axpy(rho[m] * u[m][d], model.directions()[d].as_vec(), vel);
            if (norm_inf(vel) > 1e-10) continue;

            double cost = 0.0;
            for (std::size_t m = 0; m < nf; ++m)
                for (std::size_t d = 0; d < nd; ++d) {
                    double r = model.facet_rates_local(static_cast<int>(m))[d];
                    if (r > 0.0) cost += rho[m] * r * ell(u[m][d] / r);
                }
            ++produced;
            CHECK(cost >= l0 - 1e-9);
        }
        CHECK(produced >= 50);
    }
}
