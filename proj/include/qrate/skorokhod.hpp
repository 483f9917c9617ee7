#ifndef QRATE_SKOROKHOD_HPP
#define QRATE_SKOROKHOD_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrate/local_model.hpp"
#include "qrate/path_rate.hpp"
#include "qrate/rate_solver.hpp"

namespace qrate {

// Constraint data {(n_i, d_i)} defining the domain G = {x : <x,n_i> >= 0}
// and the admissible push directions on its boundary.
struct SPInstance {
    int dim = 0;
    std::vector<Vec> normals;     // unit n_i
    std::vector<Vec> directions;  // unit d_i, <d_i, n_i> > 0

    std::size_t q() const { return normals.size(); }

    void check() const {
        for (std::size_t i = 0; i < q(); ++i) {
            if (std::fabs(norm2(normals[i]) - 1.0) > 1e-12 ||
                std::fabs(norm2(directions[i]) - 1.0) > 1e-12)
                throw std::invalid_argument("SPInstance: normals/directions must be unit");
            if (dot(normals[i], directions[i]) <= 0.0)
                throw std::invalid_argument("SPInstance: <d_i, n_i> must be positive");
        }
    }

    std::vector<std::size_t> active_at(const Vec& x, double tol_scale = 1e-9) const {
        std::vector<std::size_t> act;
        double tol = tol_scale * (1.0 + norm2(x));
        for (std::size_t i = 0; i < q(); ++i)
            if (dot(x, normals[i]) <= tol) act.push_back(i);
        return act;
    }
};

inline Vec normalize(Vec v) {
    double n = norm2(v);
    if (n <= 1e-14) throw std::invalid_argument("normalize: zero vector");
    for (double& x : v) x /= n;
    return v;
}

// Jackson reflection data: q = N, n_i = e_i,
// d_i ~ -sum_{j != i} c_{i,j} sigma_i p_{i,j} (e_j - e_i) + c_i^- sigma_i p_{i,0} e_i.
inline SPInstance sp_for_jackson(const JacksonSpec& jspec, const TiltVector& c) {
    NetworkSpec spec{jspec};
    auto dirs = jump_directions(spec);
    if (c.size() != dirs.size()) throw std::invalid_argument("sp_for_jackson: tilt size");
    for (double cv : c.c)
        if (cv <= 0.0) throw std::invalid_argument("sp_for_jackson: c must be strictly positive");
    const int n = jspec.N;
    SPInstance sp;
    sp.dim = n;
    for (int i = 0; i < n; ++i) {
        Vec e(n, 0.0);
        e[i] = 1.0;
        sp.normals.push_back(e);
        Vec d(n, 0.0);
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const auto& v = dirs[k];
            if (v.is_arrival() || v.neg_index() != i) continue;
            double rate = v.is_exit() ? jspec.sigma[i] * jspec.p_exit(i)
                                      : jspec.sigma[i] * jspec.p_route(i, v.pos_index());
            if (v.is_exit()) d[i] += c[k] * rate;
            else axpy(-c[k] * rate, v.as_vec(), d);
        }
        sp.directions.push_back(normalize(d));
    }
    sp.check();
    return sp;
}

// Processor-sharing reflection data: q = N + 1 with the supplemental
// constraint n_{N+1} = d_{N+1} ~ C Lambda (1,...,1)^T; the extra
// half-space is redundant for the orthant but supplies the push
// direction needed at the origin facet.
inline SPInstance sp_for_ps(const ProcessorSharingSpec& pspec, const TiltVector& c) {
    NetworkSpec spec{pspec};
    auto dirs = jump_directions(spec);
    if (c.size() != dirs.size()) throw std::invalid_argument("sp_for_ps: tilt size");
    for (double cv : c.c)
        if (cv <= 0.0) throw std::invalid_argument("sp_for_ps: c must be strictly positive");
    const int n = pspec.N;
    Vec cminus(n, 0.0);
    for (std::size_t k = 0; k < dirs.size(); ++k)
        if (dirs[k].is_exit()) cminus[dirs[k].neg_index()] = c[k];
    SPInstance sp;
    sp.dim = n;
    for (int i = 0; i < n; ++i) {
        Vec e(n, 0.0);
        e[i] = 1.0;
        sp.normals.push_back(e);
        Vec d(n, 0.0);
        for (int j = 0; j < n; ++j) d[j] = cminus[j] * pspec.sigma[j] * ((i == j ? 1.0 : 0.0) - pspec.f[j]);
        sp.directions.push_back(normalize(d));
    }
    Vec supp(n, 0.0);
    for (int j = 0; j < n; ++j) supp[j] = cminus[j] * pspec.sigma[j];
    for (double s : supp)
        if (s <= 0.0) throw std::logic_error("sp_for_ps: supplemental normal not positive");
    supp = normalize(supp);
    sp.normals.push_back(supp);
    sp.directions.push_back(supp);
    sp.check();
    return sp;
}

// Structural hypotheses of the diagonal-change-of-variable regularity
// argument for the PS instance: with B = diag(c_i^- sigma_i), every pair
// must be the B-transform of the canonical instance
// (n_i = e_i, d_i = (e_i - f)/||.||, n_{N+1} = d_{N+1} = 1/sqrt(N)).
inline bool ps_matches_canonical_transform(const SPInstance& sp, const ProcessorSharingSpec& pspec,
                                           const TiltVector& c, double tol = 1e-12) {
    NetworkSpec spec{pspec};
    auto dirs = jump_directions(spec);
    const int n = pspec.N;
    if (sp.q() != static_cast<std::size_t>(n + 1)) return false;
    Vec b(n, 0.0);
    for (std::size_t k = 0; k < dirs.size(); ++k)
        if (dirs[k].is_exit()) b[dirs[k].neg_index()] = c[k] * pspec.sigma[dirs[k].neg_index()];
    auto transform = [&](const Vec& v) {
        Vec out(n, 0.0);
        for (int i = 0; i < n; ++i) out[i] = b[i] * v[i];
        return normalize(out);
    };
    for (int i = 0; i <= n; ++i) {
        Vec cn(n, 0.0), cd(n, 0.0);
        if (i < n) {
            cn[i] = 1.0;
            for (int j = 0; j < n; ++j) cd[j] = (i == j ? 1.0 : 0.0) - pspec.f[j];
        } else {
            cn.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
            cd = cn;
        }
        // normals of the canonical instance transform through B as well,
        // except the coordinate ones, which stay put
        Vec want_n = i < n ? cn : transform(cn);
        Vec want_d = transform(normalize(cd));
        if (norm_inf(sp.normals[i] - want_n) > tol) return false;
        if (norm_inf(sp.directions[i] - want_d) > tol) return false;
    }
    return true;
}

// gamma in d(x): nonnegative-combination test over the directions active
// at x, decided by small-scale NNLS.
inline bool cone_membership(const SPInstance& sp, const Vec& x, const Vec& gamma,
                            double residual_tol = 1e-9) {
    auto act = sp.active_at(x);
    if (act.empty()) throw std::invalid_argument("cone_membership: point is interior");
    if (std::fabs(norm2(gamma) - 1.0) > 1e-6)
        throw std::invalid_argument("cone_membership: gamma must be a unit vector");
    std::vector<Vec> cols;
    for (auto i : act) cols.push_back(sp.directions[i]);
    auto r = nnls_enumerate(cols, gamma);
    return r.residual <= residual_tol;
}

struct QMatrixResult {
    bool applicable = false;
    Mat Q;
    double spectral_radius = 0.0;
    bool regular = false;
};

// Q_{ij} = |delta_ij - <d_i,n_j>/<d_i,n_i>|, regular when sigma(Q) < 1.
// Applies to instances with at most dim constraints and independent
// directions; localized sub-collections keep the same form.
inline QMatrixResult regularity_Q(const SPInstance& sp) {
    QMatrixResult out;
    const std::size_t q = sp.q();
    if (q == 0 || q > static_cast<std::size_t>(sp.dim)) return out;
    if (orthonormal_basis(sp.directions).size() != q) return out;  // rank-deficient
    out.applicable = true;
    out.Q = Mat(q, q);
    for (std::size_t i = 0; i < q; ++i) {
        double dii = dot(sp.directions[i], sp.normals[i]);
        for (std::size_t j = 0; j < q; ++j) {
            double delta = i == j ? 1.0 : 0.0;
            out.Q(i, j) = std::fabs(delta - dot(sp.directions[i], sp.normals[j]) / dii);
        }
    }
    out.spectral_radius = spectral_radius_nonneg(out.Q, 1e-10);
    out.regular = out.spectral_radius < 1.0 - 1e-9;
    return out;
}

// Constraints active at a boundary point; localized problems inherit
// regularity from the parent instance.
inline SPInstance localize_sp(const SPInstance& sp, const Vec& x) {
    auto act = sp.active_at(x);
    SPInstance sub;
    sub.dim = sp.dim;
    for (auto i : act) {
        sub.normals.push_back(sp.normals[i]);
        sub.directions.push_back(sp.directions[i]);
    }
    return sub;
}

struct PushConeFacetCheck {
    IndexMask facet = 0;
    double gap_norm = 0.0;
    bool in_cone = true;
};

struct PushConeReport {
    bool normals_ok = false;     // <d_i, n_i> > 0 and domain reconstruction
    bool all_facets_ok = false;
    std::vector<PushConeFacetCheck> facets;
};

// Per nonempty facet I of the local model: the boundary drift correction
// sum_v c_v (r_{I,v} - r_{empty,v}) v, once normalized, must lie in the
// push cone d(x) at points of that facet.
inline PushConeReport check_push_cones(const LocalModel& model, const TiltVector& c,
                                       const SPInstance& sp) {
    PushConeReport rep;
    rep.normals_ok = true;
    for (std::size_t i = 0; i < sp.q(); ++i)
        if (dot(sp.directions[i], sp.normals[i]) <= 0.0) rep.normals_ok = false;
    rep.all_facets_ok = true;
    const int n = model.dimension();
    const auto k_idx = model.k_indices();
    const std::size_t kk = k_idx.size();
    for (std::size_t m = 1; m < (std::size_t{1} << kk); ++m) {
        IndexMask gi = model.global_facet(static_cast<int>(m));
        PushConeFacetCheck chk;
        chk.facet = gi;
        Vec gap = facet_drift_gap(model, gi, c);
        chk.gap_norm = norm2(gap);
        if (chk.gap_norm > 1e-12) {
            Vec rep_point(n, 1.0);
            for (int i : mask_to_indices(gi)) rep_point[i] = 0.0;
            chk.in_cone = cone_membership(sp, rep_point, normalize(gap));
        }
        rep.facets.push_back(chk);
        if (!chk.in_cone) rep.all_facets_ok = false;
    }
    return rep;
}

struct SPSolution {
    Vec times;
    std::vector<Vec> phi;
    std::vector<Vec> eta;
    double total_variation = 0.0;
    bool verified = false;
    std::string verification_failure;
};

// Time-stepping solver for Definition 1: per step the increment of eta is
// sum_i alpha_i d_i with alpha >= 0 and complementarity against the
// constraints, found by the projection fixed point
//   alpha_i <- max(0, alpha_i - <phi(alpha), n_i> / <d_i, n_i>),
// a contraction whenever sigma(Q) < 1.
inline SPSolution solve_sp(const SPInstance& sp, const PiecewisePath& psi, double dt) {
    sp.check();
    if (dt <= 0.0 || dt > 1.0) throw std::invalid_argument("solve_sp: bad step");
    const int n = sp.dim;
    const std::size_t q = sp.q();

    SPSolution out;
    Vec psi0 = psi.at(0.0);
    for (std::size_t i = 0; i < q; ++i)
        if (dot(psi0, sp.normals[i]) < -1e-12) throw std::invalid_argument("solve_sp: psi(0) outside G");

    std::size_t steps = static_cast<std::size_t>(std::ceil(1.0 / dt - 1e-12));
    out.times.resize(steps + 1);
    out.phi.resize(steps + 1);
    out.eta.resize(steps + 1);
    out.times[0] = 0.0;
    out.phi[0] = psi0;
    out.eta[0] = Vec(n, 0.0);

    Vec eta(n, 0.0);
    std::vector<Vec> alphas(steps, Vec(q, 0.0));
    for (std::size_t k = 0; k < steps; ++k) {
        double t1 = std::min(1.0, static_cast<double>(k + 1) * dt);
        Vec target = psi.at(t1) + eta;  // phi before any new push
        Vec alpha(q, 0.0);
        Vec phi = target;
        bool converged = false;
        for (int it = 0; it < 50000; ++it) {
            double change = 0.0;
            for (std::size_t i = 0; i < q; ++i) {
                double w = dot(phi, sp.normals[i]);
                double dii = dot(sp.directions[i], sp.normals[i]);
                double na = std::max(0.0, alpha[i] - w / dii);
                double delta = na - alpha[i];
                if (delta != 0.0) {
                    axpy(delta, sp.directions[i], phi);
                    alpha[i] = na;
                    change = std::max(change, std::fabs(delta));
                }
            }
            if (change <= 1e-15 * (1.0 + norm2(phi))) {
                converged = true;
                break;
            }
        }
        if (!converged) throw SolverError("solve_sp: projection fixed point did not converge");
        Vec deta(n, 0.0);
        for (std::size_t i = 0; i < q; ++i) axpy(alpha[i], sp.directions[i], deta);
        eta = eta + deta;
        out.total_variation += norm2(deta);
        out.times[k + 1] = t1;
        out.eta[k + 1] = eta;
        out.phi[k + 1] = psi.at(t1) + eta;
        alphas[k] = alpha;
    }

    // a posteriori verification of Definition 1 (properties 1-5)
    double tv_psi = 0.0;
    for (std::size_t k = 1; k < psi.times.size(); ++k) tv_psi += norm2(psi.values[k] - psi.values[k - 1]);
    const double tol = 1e-6 * (1.0 + tv_psi);
    out.verified = true;
    for (std::size_t k = 0; k <= steps && out.verified; ++k) {
        const Vec& phi = out.phi[k];
        // phi = psi + eta holds by construction; check the domain
        for (std::size_t i = 0; i < q; ++i)
            if (dot(phi, sp.normals[i]) < -1e-9 * (1.0 + norm2(phi))) {
                out.verified = false;
                out.verification_failure = "phi leaves G at step " + std::to_string(k);
            }
        if (k == 0) continue;
        Vec deta = out.eta[k] - out.eta[k - 1];
        double dn = norm2(deta);
        if (dn <= tol * dt) continue;
        // pushes only at the boundary, with complementary slackness
        const Vec& alpha = alphas[k - 1];
        for (std::size_t i = 0; i < q; ++i) {
            if (alpha[i] > 1e-12 &&
                dot(phi, sp.normals[i]) > 1e-9 * (1.0 + norm2(phi)) + tol) {
                out.verified = false;
                out.verification_failure = "push off the boundary at step " + std::to_string(k);
            }
        }
        // direction of the push lies in the cone d(phi)
        if (out.verified && sp.q() <= 8) {
            if (!cone_membership(sp, phi, normalize(deta), tol)) {
                out.verified = false;
                out.verification_failure = "push direction outside d(x) at step " + std::to_string(k);
            }
        }
    }
    if (!out.verified && out.verification_failure.empty())
        out.verification_failure = "unknown";
    return out;
}

}  // namespace qrate

#endif
