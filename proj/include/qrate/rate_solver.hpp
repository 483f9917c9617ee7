#ifndef QRATE_RATE_SOLVER_HPP
#define QRATE_RATE_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrate/local_model.hpp"
#include "qrate/network.hpp"

namespace qrate {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Per-direction tilting cost: ell(a) = a log a - a + 1, with 0 log 0 = 0.
inline double ell(double a) {
    if (a < 0.0) return kInf;
    if (a == 0.0) return 1.0;
    return a * std::log(a) - a + 1.0;
}

enum class SolveStatus { zero, finite, infinite };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::zero: return "zero";
        case SolveStatus::finite: return "finite";
        default: return "infinite";
    }
}

// ------------------------------------------------------------------
// Inner problem: minimize sum_v w_v ell(c_v) subject to
// sum_v w_v c_v v = beta, c >= 0. Solved in the dual,
//   g(lambda) = <lambda,beta> - sum_v w_v (e^<lambda,v> - 1),
// by safeguarded Newton; at the optimum c_v = e^<lambda,v> and the
// gradient of g is exactly the primal feasibility residual.
// ------------------------------------------------------------------

struct InnerResult {
    SolveStatus status = SolveStatus::infinite;
    double value = kInf;
    Vec lambda;              // dual point, embedded in R^N
    std::vector<double> c;   // multiplier per direction (1 on dead directions)
    int iterations = 0;
};

inline InnerResult inner_dual_solve(const std::vector<JumpDirection>& dirs,
                                    const std::vector<double>& weights, const Vec& beta,
                                    double feas_tol = 1e-10) {
    const std::size_t nd = dirs.size();
    const std::size_t dim = beta.size();
    if (weights.size() != nd) throw std::invalid_argument("inner_dual_solve: size mismatch");
    for (double w : weights)
        if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("inner_dual_solve: bad weight");

    InnerResult out;
    out.lambda.assign(dim, 0.0);
    out.c.assign(nd, 1.0);

    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < nd; ++i)
        if (weights[i] > 0.0) alive.push_back(i);

    if (alive.empty()) {
        if (norm_inf(beta) <= 1e-12) {
            out.status = SolveStatus::zero;
            out.value = 0.0;
        }
        return out;
    }

    std::vector<Vec> alive_vecs;
    alive_vecs.reserve(alive.size());
    for (auto i : alive) alive_vecs.push_back(dirs[i].as_vec());
    auto basis = orthonormal_basis(alive_vecs);
    const std::size_t k = basis.size();

    Vec beta_proj = project_onto_span(basis, beta);
    if (norm2(beta - beta_proj) > 1e-9 * (1.0 + norm2(beta))) return out;  // beta not attainable

    Vec beta_r(k, 0.0);
    std::vector<Vec> v_r(alive.size(), Vec(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) {
        beta_r[j] = dot(beta, basis[j]);
        for (std::size_t s = 0; s < alive.size(); ++s) v_r[s][j] = dot(alive_vecs[s], basis[j]);
    }

    auto eval_g = [&](const Vec& mu, bool& ok) {
        double g = dot(mu, beta_r);
        ok = true;
        for (std::size_t s = 0; s < alive.size(); ++s) {
            double expo = dot(mu, v_r[s]);
            if (expo > 500.0) { ok = false; return -kInf; }
            g -= weights[alive[s]] * (std::exp(expo) - 1.0);
        }
        return g;
    };

    Vec mu(k, 0.0);
    bool ok = true;
    double g = eval_g(mu, ok);
    const double tol = feas_tol * 0.1 * (1.0 + norm_inf(beta));
    const int max_iter = 300;

    for (int it = 0; it < max_iter; ++it) {
        Vec grad = beta_r;
        Mat hess(k, k);
        for (std::size_t s = 0; s < alive.size(); ++s) {
            double e = weights[alive[s]] * std::exp(dot(mu, v_r[s]));
            axpy(-e, v_r[s], grad);
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t q = 0; q < k; ++q) hess(p, q) += e * v_r[s][p] * v_r[s][q];
        }
        if (norm_inf(grad) <= tol) {
            out.status = g <= 1e-12 ? SolveStatus::zero : SolveStatus::finite;
            out.value = std::max(g, 0.0);
            for (std::size_t j = 0; j < k; ++j) axpy(mu[j], basis[j], out.lambda);
            for (std::size_t s = 0; s < alive.size(); ++s)
                out.c[alive[s]] = std::exp(dot(mu, v_r[s]));
            out.iterations = it;
            return out;
        }
        if (norm_inf(mu) > 1e3) return out;  // dual diverging: beta outside the attainable cone
        double reg = 1e-14;
        Vec step;
        for (int tries = 0; tries < 6; ++tries) {
            Mat h = hess;
            for (std::size_t p = 0; p < k; ++p) h(p, p) += reg;
            if (solve_dense(h, grad, step)) break;
            reg *= 1e3;
            step.clear();
        }
        if (step.empty()) throw SolverError("inner_dual_solve: singular Hessian");
        double slope = dot(grad, step);
        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vec trial = mu;
            axpy(t, step, trial);
            bool tok = true;
            double gt = eval_g(trial, tok);
            if (tok && gt > g && gt - g >= 1e-4 * t * slope) {
                mu = trial;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // g is flat to machine precision; in that basin the pure Newton
            // step lands on the maximizer, so take it whole
            Vec trial = mu;
            axpy(1.0, step, trial);
            bool tok = true;
            double gt = eval_g(trial, tok);
            if (!tok || gt < g - 1e-12 * (1.0 + std::fabs(g)))
                throw SolverError("inner_dual_solve: line search failed");
            mu = trial;
            g = std::max(g, gt);
        }
    }
    throw SolverError("inner_dual_solve: no convergence after max iterations");
}

// ------------------------------------------------------------------
// Occupancies
// ------------------------------------------------------------------

struct OccupancyVector {
    IndexMask K = 0;
    Vec rho;  // indexed by local facet mask over K
    Vec tau;  // per coordinate, size N
};

// Product-form occupancies realizing given per-coordinate tau (exactly):
// rho_I = prod_{i in K \ I} tau_i * prod_{i in I} (1 - tau_i).
inline Vec rho_from_tau(const Vec& tau_k) {
    const std::size_t kk = tau_k.size();
    Vec rho(std::size_t{1} << kk, 0.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
        double p = 1.0;
        for (std::size_t b = 0; b < kk; ++b) p *= (m & (std::size_t{1} << b)) ? (1.0 - tau_k[b]) : tau_k[b];
        rho[m] = p;
    }
    return rho;
}

// Averaged rates rbar_v = sum_I rho_I r_{I,v}.
inline std::vector<double> rbar_from(const LocalModel& model, const Vec& rho) {
    if (rho.size() != model.facet_count()) throw std::invalid_argument("rbar_from: rho size");
    std::vector<double> rbar(model.directions().size(), 0.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
        const auto& row = model.facet_rates_local(static_cast<int>(m));
        for (std::size_t d = 0; d < rbar.size(); ++d) rbar[d] += rho[m] * row[d];
    }
    return rbar;
}

struct RateSolution {
    SolveStatus status = SolveStatus::infinite;
    double value = kInf;
    Vec beta;
    TiltVector c;
    OccupancyVector occupancy;
    std::vector<double> rbar;
    Vec lambda;

    static RateSolution infinite(const Vec& beta, std::size_t ndirs) {
        RateSolution s;
        s.beta = beta;
        s.c = TiltVector::ones(ndirs);
        return s;
    }
};

namespace detail {

inline bool beta_on_facet(const Vec& beta, IndexMask k) {
    for (int i : mask_to_indices(k))
        if (std::fabs(beta[i]) > kFacetTol) return false;
    return true;
}

struct Ps1dCost {
    double value = kInf;
    double cplus = 0.0;
    double cminus = 1.0;
};

// min A ell(x) + M ell(y) s.t. A x - M y = b, x,y >= 0. The stationarity
// pair is y = 1/x with A x^2 - b x - M = 0; service dead (M = 0) leaves
// the arrival multiplier pinned by the constraint.
inline Ps1dCost ps_coordinate_cost(double A, double M, double b) {
    Ps1dCost r;
    if (M <= 0.0) {
        if (b < -1e-14) return r;  // service required but unavailable
        double x = std::max(b, 0.0) / A;
        r.cplus = x;
        r.value = A * ell(x);
        return r;
    }
    double s = std::sqrt(b * b + 4.0 * A * M);
    double x = (b >= 0.0) ? (b + s) / (2.0 * A) : (2.0 * M) / (s - b);
    r.cplus = x;
    r.cminus = 1.0 / x;  // A x - b = M / x at the stationary point
    r.value = A * ell(x) + M * ell(r.cminus);
    return r;
}

inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double& best_x,
                         int iters = 80) {
    const double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    best_x = (f1 <= f2) ? x1 : x2;
    double fb = std::min(f1, f2);
    // endpoints can win when the minimizer sits on the boundary
    double fl = f(lo), fh = f(hi);
    if (fl < fb) { best_x = lo; fb = fl; }
    if (fh < fb) { best_x = hi; fb = fh; }
    return fb;
}

}  // namespace detail

// ------------------------------------------------------------------
// Jackson local rate: outer minimization over tau in [0,1]^|K|
// (every such tau is realizable by product-form occupancies), inner
// solve in the dual. Coordinate descent with golden-section line
// searches, then a projected-gradient polish with envelope gradients
// d(inner)/d w_v = 1 - c_v.
// ------------------------------------------------------------------

inline RateSolution local_rate_jackson(const JacksonSpec& jspec, IndexMask k, const Vec& beta) {
    NetworkSpec spec{jspec};
    LocalModel model(spec, k);
    const auto& dirs = model.directions();
    const std::size_t nd = dirs.size();

    if (!detail::beta_on_facet(beta, k)) return RateSolution::infinite(beta, nd);

    const auto k_idx = model.k_indices();
    const std::size_t kk = k_idx.size();
    std::vector<int> coord_of(jspec.N, -1);
    for (std::size_t b = 0; b < kk; ++b) coord_of[k_idx[b]] = static_cast<int>(b);

    const auto& r0 = model.interior_rates();
    auto weights_for = [&](const Vec& tau_k) {
        std::vector<double> w(nd);
        for (std::size_t d = 0; d < nd; ++d) {
            const auto& v = dirs[d];
            if (v.is_arrival()) {
                w[d] = r0[d];
            } else {
                int i = v.neg_index();
                double t = coord_of[i] >= 0 ? tau_k[coord_of[i]] : 1.0;
                w[d] = t * r0[d];
            }
        }
        return w;
    };

    auto inner_at = [&](const Vec& tau_k) { return inner_dual_solve(dirs, weights_for(tau_k), beta); };

    Vec tau(kk, 1.0);
    InnerResult best;
    if (kk == 0) {
        best = inner_at(tau);
        if (best.status == SolveStatus::infinite) return RateSolution::infinite(beta, nd);
    } else {
        // find a finite starting point
        std::vector<Vec> starts{Vec(kk, 1.0), Vec(kk, 0.5), Vec(kk, 0.9), Vec(kk, 0.1)};
        bool found = false;
        for (const auto& s : starts) {
            auto r = inner_at(s);
            if (r.status != SolveStatus::infinite) {
                tau = s;
                best = r;
                found = true;
                break;
            }
        }
        if (!found && kk <= 6) {
            const int levels = 5;
            std::size_t total = 1;
            for (std::size_t b = 0; b < kk; ++b) total *= levels;
            for (std::size_t code = 0; code < total && !found; ++code) {
                Vec s(kk);
                std::size_t c = code;
                for (std::size_t b = 0; b < kk; ++b) {
                    s[b] = static_cast<double>(c % levels) / (levels - 1);
                    c /= levels;
                }
                auto r = inner_at(s);
                if (r.status != SolveStatus::infinite) {
                    tau = s;
                    best = r;
                    found = true;
                }
            }
        }
        if (!found) return RateSolution::infinite(beta, nd);

        double fbest = best.value;
        for (int sweep = 0; sweep < 200; ++sweep) {
            double before = fbest;
            for (std::size_t b = 0; b < kk; ++b) {
                Vec probe = tau;
                auto line = [&](double t) {
                    probe[b] = t;
                    auto r = inner_at(probe);
                    return r.status == SolveStatus::infinite ? kInf : r.value;
                };
                double x;
                double fx = detail::golden_min(line, 0.0, 1.0, x);
                if (fx < fbest) {
                    tau[b] = x;
                    fbest = fx;
                }
            }
            if (before - fbest < 1e-10) break;
        }
        best = inner_at(tau);

        // projected-gradient polish on tau
        if (best.status != SolveStatus::infinite) {
            double fcur = best.value;
            double step = 0.5;
            for (int it = 0; it < 400; ++it) {
                Vec grad(kk, 0.0);
                for (std::size_t d = 0; d < nd; ++d) {
                    const auto& v = dirs[d];
                    if (v.is_arrival()) continue;
                    int b = coord_of[v.neg_index()];
                    if (b >= 0) grad[b] += r0[d] * (1.0 - best.c[d]);
                }
                Vec cand(kk);
                bool improved = false;
                for (int bt = 0; bt < 40; ++bt) {
                    for (std::size_t b = 0; b < kk; ++b)
                        cand[b] = std::clamp(tau[b] - step * grad[b], 0.0, 1.0);
                    auto r = inner_at(cand);
                    if (r.status != SolveStatus::infinite && r.value < fcur - 1e-16) {
                        tau = cand;
                        fcur = r.value;
                        best = r;
                        improved = true;
                        step *= 1.6;
                        break;
                    }
                    step *= 0.5;
                }
                if (!improved) break;
            }
        }
    }

    if (best.status == SolveStatus::infinite) return RateSolution::infinite(beta, nd);

    RateSolution sol;
    sol.beta = beta;
    sol.value = best.value;
    sol.status = best.value <= 1e-12 ? SolveStatus::zero : SolveStatus::finite;
    sol.lambda = best.lambda;
    sol.c.c = best.c;
    sol.occupancy.K = k;
    sol.occupancy.rho = rho_from_tau(tau);
    sol.occupancy.tau.assign(jspec.N, 1.0);
    for (std::size_t b = 0; b < kk; ++b) sol.occupancy.tau[k_idx[b]] = tau[b];
    sol.rbar = rbar_from(model, sol.occupancy.rho);
    // service averages scale linearly in tau; they must agree with the
    // occupancy-weighted form
    auto w = weights_for(tau);
    for (std::size_t d = 0; d < nd; ++d)
        if (std::fabs(w[d] - sol.rbar[d]) > 1e-9)
            throw SolverError("local_rate_jackson: averaged-rate mismatch");
    return sol;
}

// ------------------------------------------------------------------
// Processor-sharing local rate: the inner problem separates per class
// with closed forms, the outer runs over the 2^|K| occupancy simplex
// (no Jackson-style tau parametrization is available). Accelerated
// projected gradient with backtracking and restart.
// ------------------------------------------------------------------

inline RateSolution local_rate_ps(const ProcessorSharingSpec& pspec, IndexMask k, const Vec& beta) {
    NetworkSpec spec{pspec};
    LocalModel model(spec, k);
    const auto& dirs = model.directions();
    const std::size_t nd = dirs.size();
    if (!detail::beta_on_facet(beta, k)) return RateSolution::infinite(beta, nd);

    const int n = pspec.N;
    const std::size_t kk = model.k_indices().size();
    const std::size_t m = std::size_t{1} << kk;

    // tau_i(rho) = sum over facets not containing i of rho_I sigma_i f_i / f_{I^c}
    Mat tcoef(n, m);
    for (std::size_t mm = 0; mm < m; ++mm) {
        IndexMask gi = model.global_facet(static_cast<int>(mm));
        double fc = detail::f_complement(pspec, gi);
        for (int i = 0; i < n; ++i)
            if (!(gi & (1u << i))) tcoef(i, mm) = pspec.sigma[i] * pspec.f[i] / fc;
    }

    auto tau_of = [&](const Vec& rho) {
        Vec tau(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (std::size_t mm = 0; mm < m; ++mm) tau[i] += tcoef(i, mm) * rho[mm];
        return tau;
    };
    auto value_of = [&](const Vec& rho, std::vector<detail::Ps1dCost>* parts = nullptr) {
        Vec tau = tau_of(rho);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            auto c = detail::ps_coordinate_cost(pspec.a[i], tau[i], beta[i]);
            if (parts) (*parts)[i] = c;
            total += c.value;
        }
        return total;
    };

    Vec rho(m, 1.0 / static_cast<double>(m));
    std::vector<detail::Ps1dCost> parts(n);
    double fcur = value_of(rho, &parts);
    if (!std::isfinite(fcur)) return RateSolution::infinite(beta, nd);

    if (m > 1) {
        // FISTA on the simplex with backtracking and adaptive restart
        Vec y = rho;
        double theta = 1.0;
        double lip = 1.0;
        Vec best_rho = rho;
        double fbest = fcur;
        for (int it = 0; it < 200000; ++it) {
            std::vector<detail::Ps1dCost> yparts(n);
            double fy = value_of(y, &yparts);
            if (!std::isfinite(fy)) {  // extrapolation left the finite region
                y = best_rho;
                theta = 1.0;
                fy = value_of(y, &yparts);
            }
            Vec grad(m, 0.0);
            for (std::size_t mm = 0; mm < m; ++mm)
                for (int i = 0; i < n; ++i) {
                    double gi = 1.0 - std::min(yparts[i].cminus, 1e8);
                    grad[mm] += tcoef(i, mm) * gi;
                }
            Vec cand;
            double fnew = kInf;
            int bt = 0;
            for (; bt < 60; ++bt) {
                cand = project_simplex(y - (1.0 / lip) * grad);
                fnew = value_of(cand);
                Vec diff = cand - y;
                double quad = fy + dot(grad, diff) + 0.5 * lip * dot(diff, diff);
                if (std::isfinite(fnew) && fnew <= quad + 1e-15) break;
                lip *= 2.0;
            }
            if (bt == 60) break;
            double theta_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            if (fnew > fcur) {  // restart acceleration when monotonicity breaks
                y = cand;
                theta = 1.0;
            } else {
                y = project_simplex(cand + ((theta - 1.0) / theta_new) * (cand - rho));
                theta = theta_new;
            }
            rho = cand;
            double improvement = fcur - fnew;
            fcur = fnew;
            if (fnew < fbest) {
                fbest = fnew;
                best_rho = cand;
            }
            lip = std::max(lip * 0.9, 1e-6);
            if (it > 100 && std::fabs(improvement) < 1e-14 * (1.0 + std::fabs(fcur))) break;
        }
        rho = best_rho;
        fcur = value_of(rho, &parts);
    }

    RateSolution sol;
    sol.beta = beta;
    sol.value = std::max(fcur, 0.0);
    sol.status = sol.value <= 1e-12 ? SolveStatus::zero : SolveStatus::finite;
    sol.occupancy.K = k;
    sol.occupancy.rho = rho;
    sol.occupancy.tau = tau_of(rho);
    sol.c = TiltVector::ones(nd);
    sol.lambda.assign(n, 0.0);
    for (std::size_t d = 0; d < nd; ++d) {
        const auto& v = dirs[d];
        if (v.is_arrival()) sol.c[d] = parts[v.pos_index()].cplus;
        else sol.c[d] = parts[v.neg_index()].cminus;
    }
    for (int i = 0; i < n; ++i)
        sol.lambda[i] = parts[i].cplus > 0.0 ? std::log(parts[i].cplus) : -745.0;
    sol.rbar = rbar_from(model, rho);
    for (std::size_t d = 0; d < nd; ++d) {
        double expect = dirs[d].is_arrival() ? pspec.a[dirs[d].pos_index()]
                                             : sol.occupancy.tau[dirs[d].neg_index()];
        if (std::fabs(sol.rbar[d] - expect) > 1e-9)
            throw SolverError("local_rate_ps: averaged-rate mismatch");
    }
    return sol;
}

inline RateSolution local_rate(const NetworkSpec& spec, IndexMask k, const Vec& beta) {
    return spec.is_jackson() ? local_rate_jackson(spec.jackson(), k, beta)
                             : local_rate_ps(spec.ps(), k, beta);
}

// L(x, beta): localize at I(x); infinite unless beta lies in the facet's
// linear subspace.
inline RateSolution L_point_solution(const NetworkSpec& spec, const Vec& x, const Vec& beta) {
    IndexMask k = facet_index(x, full_mask(spec.size()));
    return local_rate(spec, k, beta);
}

inline double L_point(const NetworkSpec& spec, const Vec& x, const Vec& beta) {
    return L_point_solution(spec, x, beta).value;
}

// ------------------------------------------------------------------
// Jensen reduction: facet-resolved controls vs. facet-independent
// multipliers. lhs >= rhs always; equality when u_{I,v}/r_{I,v} is
// I-independent.
// ------------------------------------------------------------------

struct JensenGap {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline JensenGap jensen_gap(const LocalModel& model, const Vec& rho,
                            const std::vector<std::vector<double>>& u) {
    const std::size_t nf = model.facet_count();
    const std::size_t nd = model.directions().size();
    if (rho.size() != nf || u.size() != nf) throw std::invalid_argument("jensen_gap: sizes");
    JensenGap out;
    for (std::size_t mfac = 0; mfac < nf; ++mfac) {
        const auto& row = model.facet_rates_local(static_cast<int>(mfac));
        for (std::size_t d = 0; d < nd; ++d) {
            double r = row[d], uu = u[mfac][d];
            if (r == 0.0) {
                if (uu != 0.0) throw std::invalid_argument("jensen_gap: u positive where r vanishes");
                continue;  // 0 * ell(0/0) = 0
            }
            out.lhs += rho[mfac] * r * ell(uu / r);
        }
    }
    for (std::size_t d = 0; d < nd; ++d) {
        double num = 0.0, den = 0.0;
        for (std::size_t mfac = 0; mfac < nf; ++mfac) {
            num += rho[mfac] * u[mfac][d];
            den += rho[mfac] * model.facet_rates_local(static_cast<int>(mfac))[d];
        }
        if (den == 0.0) continue;
        out.rhs += den * ell(num / den);
    }
    return out;
}

// ------------------------------------------------------------------
// Positivity repair: given occupancies, averaged rates and multipliers
// realizing beta with some multipliers at zero, produce a nearby
// strictly positive solution realizing the same beta.
// ------------------------------------------------------------------

namespace detail {

inline std::vector<int> chain_in_digraph(const std::vector<std::vector<int>>& adj, int from, int to) {
    if (from == to) return {from};
    const int n = static_cast<int>(adj.size());
    std::vector<int> prev(n, -1);
    std::queue<int> q;
    q.push(from);
    prev[from] = from;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int w : adj[u])
            if (prev[w] < 0) {
                prev[w] = u;
                if (w == to) {
                    std::vector<int> path{to};
                    int cur = to;
                    while (cur != from) { cur = prev[cur]; path.push_back(cur); }
                    std::reverse(path.begin(), path.end());
                    return path;
                }
                q.push(w);
            }
    }
    return {};
}

}  // namespace detail

inline RateSolution perturb_positive(const LocalModel& model, const RateSolution& solution,
                                     double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("perturb_positive: kappa must be positive");
    const auto& dirs = model.directions();
    const std::size_t nd = dirs.size();
    const int n = model.dimension();
    const auto& k_idx = model.k_indices();

    RateSolution out;
    out.beta = solution.beta;
    out.occupancy.K = model.k_mask();
    out.c = TiltVector::ones(nd);

    if (model.family() == ModelFamily::jackson) {
        if (kappa >= 1.0) throw std::invalid_argument("perturb_positive: kappa must be < 1");
        const auto& r0 = model.interior_rates();
        // digraph of positive routing, plus arrival/exit node sets
        std::vector<std::vector<int>> adj(n);
        std::vector<int> hplus, hminus;
        std::vector<int> dir_of_arrival(n, -1), dir_of_exit(n, -1);
        Mat route_dir(n, n, -1.0);
        for (std::size_t d = 0; d < nd; ++d) {
            const auto& v = dirs[d];
            if (r0[d] <= 0.0) continue;
            if (v.is_arrival()) {
                hplus.push_back(v.pos_index());
                dir_of_arrival[v.pos_index()] = static_cast<int>(d);
            } else if (v.is_exit()) {
                hminus.push_back(v.neg_index());
                dir_of_exit[v.neg_index()] = static_cast<int>(d);
            } else {
                adj[v.neg_index()].push_back(v.pos_index());
                route_dir(v.neg_index(), v.pos_index()) = static_cast<double>(d);
            }
        }

        std::vector<double> mass(nd, 0.0);
        for (std::size_t d = 0; d < nd; ++d) mass[d] = solution.c[d] * solution.rbar[d];
        std::vector<long> bump(nd, 0);
        auto bump_edges = [&](const std::vector<int>& path) {
            for (std::size_t s = 0; s + 1 < path.size(); ++s) {
                int d = static_cast<int>(route_dir(path[s], path[s + 1]));
                if (d < 0) throw SolverError("perturb_positive: chain uses a missing edge");
                bump[d] += 1;
            }
        };
        for (std::size_t d = 0; d < nd; ++d) {
            if (mass[d] > 0.0) continue;
            const auto& v = dirs[d];
            bump[d] += 1;
            if (v.is_route()) {
                auto path = detail::chain_in_digraph(adj, v.pos_index(), v.neg_index());
                if (path.empty()) throw SolverError("perturb_positive: no return chain");
                bump_edges(path);
            } else if (v.is_exit()) {
                // feed the exit: an extra arrival routed to node i
                std::vector<int> best;
                int best_src = -1;
                for (int j : hplus) {
                    auto path = detail::chain_in_digraph(adj, j, v.neg_index());
                    if (!path.empty() && (best.empty() || path.size() < best.size())) {
                        best = path;
                        best_src = j;
                    }
                }
                if (best_src < 0) throw SolverError("perturb_positive: no arrival chain");
                bump[dir_of_arrival[best_src]] += 1;
                bump_edges(best);
            } else {
                // drain the arrival: route it to an exit node
                std::vector<int> best;
                int best_snk = -1;
                for (int j : hminus) {
                    auto path = detail::chain_in_digraph(adj, v.pos_index(), j);
                    if (!path.empty() && (best.empty() || path.size() < best.size())) {
                        best = path;
                        best_snk = j;
                    }
                }
                if (best_snk < 0) throw SolverError("perturb_positive: no exit chain");
                bump[dir_of_exit[best_snk]] += 1;
                bump_edges(best);
            }
        }

        Vec tau_k(k_idx.size(), 0.0);
        for (std::size_t b = 0; b < k_idx.size(); ++b) {
            double t = solution.occupancy.tau[k_idx[b]];
            tau_k[b] = t > 0.0 ? t : kappa;
        }
        out.occupancy.rho = rho_from_tau(tau_k);
        out.occupancy.tau.assign(n, 1.0);
        for (std::size_t b = 0; b < k_idx.size(); ++b) out.occupancy.tau[k_idx[b]] = tau_k[b];
        out.rbar = rbar_from(model, out.occupancy.rho);
        for (std::size_t d = 0; d < nd; ++d) {
            if (out.rbar[d] <= 0.0) {
                if (bump[d] != 0) throw SolverError("perturb_positive: bump on dead direction");
                out.c[d] = 1.0;
                continue;
            }
            out.c[d] = (mass[d] + kappa * static_cast<double>(bump[d])) / out.rbar[d];
            if (out.c[d] <= 0.0) throw SolverError("perturb_positive: nonpositive multiplier");
        }
    } else {
        // processor sharing: shift kappa of occupancy onto the interior facet,
        // then rebalance the per-class multipliers against the same beta
        Vec rho = solution.occupancy.rho;
        if (rho.empty() || rho.size() != model.facet_count())
            throw std::invalid_argument("perturb_positive: solution lacks occupancies");
        if (rho[0] <= 0.0) {
            std::size_t donor = 0;
            for (std::size_t mfac = 1; mfac < rho.size(); ++mfac)
                if (donor == 0 || rho[mfac] > rho[donor]) donor = mfac;
            if (donor == 0 || rho[donor] <= kappa)
                throw std::invalid_argument("perturb_positive: kappa exceeds shiftable mass");
            rho[0] = kappa;
            rho[donor] -= kappa;
        }
        out.occupancy.rho = rho;
        out.rbar = rbar_from(model, rho);
        out.occupancy.tau.assign(n, 0.0);
        for (std::size_t d = 0; d < nd; ++d)
            if (dirs[d].is_exit()) out.occupancy.tau[dirs[d].neg_index()] = out.rbar[d];
        const auto& ps = model.spec().ps();
        for (std::size_t d = 0; d < nd; ++d) {
            const auto& v = dirs[d];
            if (!v.is_arrival()) continue;
            int i = v.pos_index();
            double cplus = solution.c[d] + kappa;
            double tprime = out.occupancy.tau[i];
            if (tprime <= 0.0) throw SolverError("perturb_positive: tau' vanished");
            double cminus = (cplus * ps.a[i] - solution.beta[i]) / tprime;
            out.c[d] = cplus;
            int dm = model.direction_index(JumpDirection::minus_e(i, n));
            out.c[dm] = cminus;
            if (cminus <= 0.0) throw SolverError("perturb_positive: nonpositive multiplier");
        }
    }

    // the perturbed solution must still realize beta
    Vec drift(n, 0.0);
    for (std::size_t d = 0; d < nd; ++d) axpy(out.c[d] * out.rbar[d], dirs[d].as_vec(), drift);
    if (norm_inf(drift - solution.beta) > 1e-9)
        throw SolverError("perturb_positive: velocity residual exceeds 1e-9");

    out.value = 0.0;
    for (std::size_t d = 0; d < nd; ++d) out.value += out.rbar[d] * ell(out.c[d]);
    out.status = out.value <= 1e-12 ? SolveStatus::zero : SolveStatus::finite;
    return out;
}

// ------------------------------------------------------------------
// Uniqueness/continuity of the averaged rates: with the multipliers
// held fixed and strictly positive, rbar depends Lipschitz-continuously
// on the velocity.
// ------------------------------------------------------------------

struct UniquenessCheck {
    double max_deviation = 0.0;
    double lipschitz_bound = 0.0;
    bool within = false;
};

inline UniquenessCheck averaged_rate_continuity(const NetworkSpec& spec, IndexMask k,
                                                   const TiltVector& c, const Vec& beta,
                                                   const Vec& beta_prime) {
    LocalModel model(spec, k);
    const auto& dirs = model.directions();
    const std::size_t nd = dirs.size();
    if (c.size() != nd) throw std::invalid_argument("averaged_rate_continuity: tilt size");
    for (double cv : c.c)
        if (cv <= 0.0) throw std::invalid_argument("averaged_rate_continuity: c must be positive");

    UniquenessCheck out;
    const int n = model.dimension();
    auto rbar_of = [&](const Vec& b) -> std::vector<double> {
        std::vector<double> rbar(nd, 0.0);
        if (spec.is_jackson()) {
            const auto& j = spec.jackson();
            // reflection directions as columns; solve sum_i tau_i d_i = C+ a - beta
            Mat dmat(n, n);
            for (std::size_t d = 0; d < nd; ++d) {
                const auto& v = dirs[d];
                if (v.is_arrival()) continue;
                int i = v.neg_index();
                double w = c[d] * model.interior_rates()[d];
                if (v.is_exit()) {
                    dmat(i, i) += w;
                } else {
                    dmat(i, i) += w;
                    dmat(v.pos_index(), i) -= w;
                }
            }
            Vec rhs(n, 0.0);
            for (std::size_t d = 0; d < nd; ++d)
                if (dirs[d].is_arrival()) rhs[dirs[d].pos_index()] += c[d] * j.a[dirs[d].pos_index()];
            rhs = rhs - b;
            Vec tau;
            if (!solve_dense(dmat, rhs, tau))
                throw SolverError("averaged_rate_continuity: singular direction matrix");
            for (std::size_t d = 0; d < nd; ++d) {
                const auto& v = dirs[d];
                rbar[d] = v.is_arrival() ? j.a[v.pos_index()]
                                         : tau[v.neg_index()] * model.interior_rates()[d];
            }
        } else {
            const auto& ps = spec.ps();
            for (std::size_t d = 0; d < nd; ++d) {
                const auto& v = dirs[d];
                if (v.is_arrival()) {
                    rbar[d] = ps.a[v.pos_index()];
                } else {
                    int i = v.neg_index();
                    int dp = model.direction_index(JumpDirection::plus_e(i, n));
                    rbar[d] = (c[dp] * ps.a[i] - b[i]) / c[d];
                }
            }
        }
        return rbar;
    };

    auto r1 = rbar_of(beta), r2 = rbar_of(beta_prime);
    for (std::size_t d = 0; d < nd; ++d)
        out.max_deviation = std::max(out.max_deviation, std::fabs(r1[d] - r2[d]));

    double dbeta = norm_inf(beta - beta_prime);
    if (spec.is_jackson()) {
        Mat dmat(n, n);
        for (std::size_t d = 0; d < nd; ++d) {
            const auto& v = dirs[d];
            if (v.is_arrival()) continue;
            double w = c[d] * model.interior_rates()[d];
            dmat(v.neg_index(), v.neg_index()) += w;
            if (v.is_route()) dmat(v.pos_index(), v.neg_index()) -= w;
        }
        double rmax = 0.0;
        for (std::size_t d = 0; d < nd; ++d)
            if (!dirs[d].is_arrival()) rmax = std::max(rmax, model.interior_rates()[d]);
        out.lipschitz_bound = norm_inf_op(inverse(dmat)) * std::max(1.0, rmax);
    } else {
        double cmin = kInf;
        for (std::size_t d = 0; d < nd; ++d)
            if (dirs[d].is_exit()) cmin = std::min(cmin, c[d]);
        out.lipschitz_bound = 1.0 / cmin;
    }
    out.within = out.max_deviation <= out.lipschitz_bound * dbeta + 1e-12;
    return out;
}

}  // namespace qrate

#endif
