#ifndef QRATE_ORACLE_HPP
#define QRATE_ORACLE_HPP

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qrate/rate_solver.hpp"

namespace qrate {

// Grid-search evaluation of the local rate function, independent of the
// dual-Newton solver path. Desk scale only: |K| <= 2, N <= 2.
namespace oracle {

namespace detail {

// min A ell(x) + M ell(y) s.t. Ax - My = b over x,y >= 0; written out
// directly from the stationarity quadratic, all degeneracies explicit.
inline double coordinate_cost(double A, double M, double b) {
    if (A <= 0.0 && M <= 0.0) return std::fabs(b) <= 1e-14 ? 0.0 : kInf;
    if (A <= 0.0) {
        if (b > 1e-14) return kInf;
        double y = -b / M;
        return M * ell(y);
    }
    if (M <= 0.0) {
        if (b < -1e-14) return kInf;
        return A * ell(std::max(b, 0.0) / A);
    }
    double s = std::sqrt(b * b + 4.0 * A * M);
    double x = (b >= 0.0) ? (b + s) / (2.0 * A) : (2.0 * M) / (s - b);
    double y = (A * x - b) / M;
    return A * ell(x) + M * ell(y);
}

// Dense lambda-grid maximization of the dual on [-6,6]^2, refined
// coarse-to-fine down to `final_step`, re-centering while the incumbent
// sits on a window edge.
inline double dual_grid_2d(const std::vector<JumpDirection>& dirs, const std::vector<double>& w,
                           const Vec& beta, double final_step) {
    const double box = 6.0;
    auto eval_window = [&](double c1, double c2, double half, double step, double& m1, double& m2) {
        double lo1 = std::max(c1 - half, -box), hi1 = std::min(c1 + half, box);
        double lo2 = std::max(c2 - half, -box), hi2 = std::min(c2 + half, box);
        std::size_t n1 = static_cast<std::size_t>((hi1 - lo1) / step) + 1;
        std::size_t n2 = static_cast<std::size_t>((hi2 - lo2) / step) + 1;
        std::vector<double> e1p(n1), e1m(n1), l1(n1), e2p(n2), e2m(n2), l2(n2);
        for (std::size_t i = 0; i < n1; ++i) {
            l1[i] = lo1 + static_cast<double>(i) * step;
            e1p[i] = std::exp(l1[i]);
            e1m[i] = 1.0 / e1p[i];
        }
        for (std::size_t j = 0; j < n2; ++j) {
            l2[j] = lo2 + static_cast<double>(j) * step;
            e2p[j] = std::exp(l2[j]);
            e2m[j] = 1.0 / e2p[j];
        }
        struct Term {
            double w;
            const std::vector<double>* f1;
            const std::vector<double>* f2;
        };
        std::vector<Term> terms;
        double wsum = 0.0;
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            if (w[d] <= 0.0) continue;
            wsum += w[d];
            const auto& v = dirs[d].v;
            Term t{w[d], nullptr, nullptr};
            if (v[0] == 1) t.f1 = &e1p;
            else if (v[0] == -1) t.f1 = &e1m;
            if (v[1] == 1) t.f2 = &e2p;
            else if (v[1] == -1) t.f2 = &e2m;
            terms.push_back(t);
        }
        double best = -kInf;
        for (std::size_t i = 0; i < n1; ++i) {
            double base1 = l1[i] * beta[0];
            for (std::size_t j = 0; j < n2; ++j) {
                double g = base1 + l2[j] * beta[1] + wsum;
                for (const auto& t : terms) {
                    double prod = t.w;
                    if (t.f1) prod *= (*t.f1)[i];
                    if (t.f2) prod *= (*t.f2)[j];
                    g -= prod;
                }
                if (g > best) {
                    best = g;
                    m1 = l1[i];
                    m2 = l2[j];
                }
            }
        }
        return best;
    };

    double c1 = 0.0, c2 = 0.0, m1 = 0.0, m2 = 0.0;
    double best = eval_window(0.0, 0.0, box, 0.1, m1, m2);
    c1 = m1;
    c2 = m2;
    const std::array<std::pair<double, double>, 2> stages{{{0.01, 0.2}, {final_step, 0.03}}};
    for (auto [step, half] : stages) {
        for (int expand = 0; expand < 25; ++expand) {
            best = eval_window(c1, c2, half, step, m1, m2);
            bool on_edge = (std::fabs(std::fabs(m1 - c1) - half) < step && std::fabs(m1) < box - step) ||
                           (std::fabs(std::fabs(m2 - c2) - half) < step && std::fabs(m2) < box - step);
            c1 = m1;
            c2 = m2;
            if (!on_edge) break;
        }
    }
    return best;
}

inline void simplex_grid(std::size_t vars, long units, Vec& work,
                         const std::function<void(const Vec&)>& visit, std::size_t pos = 0,
                         long left = -1) {
    if (left < 0) left = units;
    if (pos + 1 == vars) {
        work[pos] = static_cast<double>(left) / static_cast<double>(units);
        visit(work);
        return;
    }
    for (long u = 0; u <= left; ++u) {
        work[pos] = static_cast<double>(u) / static_cast<double>(units);
        simplex_grid(vars, units, work, visit, pos + 1, left - u);
    }
}

}  // namespace detail

inline double brute_force_L(const LocalModel& model, const Vec& beta, double resolution) {
    const int n = model.dimension();
    const std::size_t kk = model.k_indices().size();
    if (n > 2 || kk > 2)
        throw std::invalid_argument("brute_force_L: instance above desk scale");
    for (int i : model.k_indices())
        if (std::fabs(beta[i]) > kFacetTol) return kInf;

    const auto& dirs = model.directions();
    const auto& r0 = model.interior_rates();

    if (model.family() == ModelFamily::processor_sharing) {
        const auto& ps = model.spec().ps();
        const std::size_t m = model.facet_count();
        Mat tcoef(n, m);
        for (std::size_t mm = 0; mm < m; ++mm) {
            IndexMask gi = model.global_facet(static_cast<int>(mm));
            double fc = qrate::detail::f_complement(ps, gi);
            for (int i = 0; i < n; ++i)
                if (!(gi & (1u << i))) tcoef(i, mm) = ps.sigma[i] * ps.f[i] / fc;
        }
        long units = std::lround(1.0 / resolution);
        double best = kInf;
        Vec work(m, 0.0);
        detail::simplex_grid(m, units, work, [&](const Vec& rho) {
            double total = 0.0;
            for (int i = 0; i < n && total < best; ++i) {
                double tau = 0.0;
                for (std::size_t mm = 0; mm < m; ++mm) tau += tcoef(i, mm) * rho[mm];
                total += detail::coordinate_cost(ps.a[i], tau, beta[i]);
            }
            best = std::min(best, total);
        });
        return best;
    }

    // Jackson: grid tau, evaluate the inner problem per grid point
    bool has_routes = false;
    for (std::size_t d = 0; d < dirs.size(); ++d)
        if (dirs[d].is_route() && r0[d] > 0.0) has_routes = true;

    const auto& k_idx = model.k_indices();
    std::vector<int> coord_of(n, -1);
    for (std::size_t b = 0; b < kk; ++b) coord_of[k_idx[b]] = static_cast<int>(b);

    auto inner_value = [&](const Vec& tau_k) {
        std::vector<double> w(dirs.size(), 0.0);
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            const auto& v = dirs[d];
            if (v.is_arrival()) {
                w[d] = r0[d];
            } else {
                int b = coord_of[v.neg_index()];
                w[d] = (b >= 0 ? tau_k[b] : 1.0) * r0[d];
            }
        }
        if (!has_routes) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                double A = 0.0, M = 0.0;
                for (std::size_t d = 0; d < dirs.size(); ++d) {
                    if (dirs[d].is_arrival() && dirs[d].pos_index() == i) A = w[d];
                    if (dirs[d].is_exit() && dirs[d].neg_index() == i) M = w[d];
                }
                total += detail::coordinate_cost(A, M, beta[i]);
                if (!std::isfinite(total)) return kInf;
            }
            return total;
        }
        return detail::dual_grid_2d(dirs, w, beta, resolution / 4.0);
    };

    long units = std::lround(1.0 / resolution);
    double best = kInf;
    if (kk == 0) {
        best = inner_value(Vec{});
    } else if (kk == 1) {
        Vec tau(1);
        for (long u = 0; u <= units; ++u) {
            tau[0] = static_cast<double>(u) / static_cast<double>(units);
            best = std::min(best, inner_value(tau));
        }
    } else {
        Vec tau(2);
        for (long u1 = 0; u1 <= units; ++u1) {
            tau[0] = static_cast<double>(u1) / static_cast<double>(units);
            for (long u2 = 0; u2 <= units; ++u2) {
                tau[1] = static_cast<double>(u2) / static_cast<double>(units);
                best = std::min(best, inner_value(tau));
            }
        }
    }
    return best;
}

}  // namespace oracle

}  // namespace qrate

#endif
