#ifndef QRATE_SIMULATE_HPP
#define QRATE_SIMULATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qrate/local_model.hpp"
#include "qrate/rate_solver.hpp"
#include "qrate/rng.hpp"

namespace qrate {

struct SimConfig {
    long n = 1;             // LLN/LDP scaling parameter
    long reps = 1;
    std::uint64_t seed = 0;
    double epsilon = 0.1;   // tube radius
    Vec beta;               // tube center velocity
    std::optional<TiltVector> control;  // absent = original rates
    // horizon is fixed at 1

    void check(const LocalModel& model) const {
        if (n < 1 || reps < 1 || epsilon <= 0.0) throw std::invalid_argument("SimConfig: bad parameters");
        if (static_cast<int>(beta.size()) != model.dimension())
            throw std::invalid_argument("SimConfig: beta size");
        if (control && control->size() != model.directions().size())
            throw std::invalid_argument("SimConfig: control size");
    }
};

struct TrajectorySample {
    Vec jump_times;               // includes t = 0
    std::vector<Vec> states;      // scaled, offset-centered; states[k] holds on [t_k, t_{k+1})
    Vec facet_occupancy;          // fraction of [0,1] per local facet mask
    Vec terminal;
    double log_weight = 0.0;      // log dP/dPbar along the path (0 without control)
};

struct TubeEstimate {
    double p_hat = 0.0;
    double standard_error = 0.0;
    double q_hat = kInf;  // -(1/n) log pHat
    std::string method;   // "naive" | "importance"
    bool flagged = false; // pHat == 0 in naive mode
    long n = 0;
    long reps = 0;
};

namespace detail {

struct SimTables {
    std::vector<std::vector<double>> u;      // tilted rate per facet x direction
    std::vector<double> u_total;             // per facet
    std::vector<double> gap_total;           // per facet: sum (u - r)
    std::vector<std::vector<double>> log_c;  // per facet x direction (for weights)
};

inline SimTables build_tables(const LocalModel& model, const std::optional<TiltVector>& control) {
    SimTables t;
    const std::size_t nf = model.facet_count();
    const std::size_t nd = model.directions().size();
    t.u.assign(nf, std::vector<double>(nd, 0.0));
    t.log_c.assign(nf, std::vector<double>(nd, 0.0));
    t.u_total.assign(nf, 0.0);
    t.gap_total.assign(nf, 0.0);
    for (std::size_t m = 0; m < nf; ++m) {
        const auto& row = model.facet_rates_local(static_cast<int>(m));
        for (std::size_t d = 0; d < nd; ++d) {
            double c = control ? (*control)[d] : 1.0;
            if (control && row[d] > 0.0 && c <= 0.0)
                throw std::invalid_argument("simulate: control must be positive where rates are");
            t.u[m][d] = c * row[d];
            t.u_total[m] += t.u[m][d];
            t.gap_total[m] += t.u[m][d] - row[d];
            t.log_c[m][d] = (row[d] > 0.0 && c > 0.0) ? std::log(c) : 0.0;
        }
    }
    return t;
}

template <typename F>
inline void parallel_for(long count, int threads, F&& body) {
    if (threads <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&]() {
        for (;;) {
            long i = next.fetch_add(1);
            if (i >= count) return;
            body(i);
        }
    };
    unsigned nt = std::min<unsigned>(static_cast<unsigned>(threads), std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::max(1u, nt); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Exact continuous-time simulation of the (optionally tilted) scaled local
// model on [0,1]. Coordinates outside K start at a large offset so the
// unconstrained axes never see their boundary; states are reported centered.
inline TrajectorySample simulate_path(const LocalModel& model, const SimConfig& cfg, long rep) {
    cfg.check(model);
    const int n_dim = model.dimension();
    const auto& dirs = model.directions();
    const std::size_t nd = dirs.size();
    const auto k_idx = model.k_indices();
    std::vector<int> coord_of(n_dim, -1);
    for (std::size_t b = 0; b < k_idx.size(); ++b) coord_of[k_idx[b]] = static_cast<int>(b);

    auto tables = detail::build_tables(model, cfg.control);
    const double scale = static_cast<double>(cfg.n);

    std::vector<long long> x(n_dim, 0);
    std::vector<long long> offset(n_dim, 0);
    for (int i = 0; i < n_dim; ++i)
        if (coord_of[i] < 0) {
            offset[i] = 10 * cfg.n;
            x[i] = offset[i];
        }

    auto centered = [&](const std::vector<long long>& s) {
        Vec out(n_dim, 0.0);
        for (int i = 0; i < n_dim; ++i) out[i] = static_cast<double>(s[i] - offset[i]) / scale;
        return out;
    };
    auto facet_of = [&](const std::vector<long long>& s) {
        int m = 0;
        for (std::size_t b = 0; b < k_idx.size(); ++b)
            if (s[k_idx[b]] == 0) m |= (1 << b);
        return m;
    };

    PathRng rng(cfg.seed, static_cast<std::uint64_t>(rep));
    TrajectorySample sample;
    sample.facet_occupancy.assign(model.facet_count(), 0.0);
    sample.jump_times.push_back(0.0);
    sample.states.push_back(centered(x));

    double t = 0.0;
    while (true) {
        int m = facet_of(x);
        double total = scale * tables.u_total[m];
        double hold = total > 0.0 ? rng.next_exponential(total) : kInf;
        double t_next = t + hold;
        double seg_end = std::min(t_next, 1.0);
        sample.facet_occupancy[m] += seg_end - t;
        if (cfg.control) sample.log_weight += scale * tables.gap_total[m] * (seg_end - t);
        if (t_next >= 1.0) break;
        t = t_next;
        double pick = rng.next_uniform() * tables.u_total[m];
        std::size_t d = 0;
        double acc = 0.0;
        for (; d < nd; ++d) {
            acc += tables.u[m][d];
            if (pick <= acc) break;
        }
        if (d == nd) d = nd - 1;
        if (cfg.control) sample.log_weight -= tables.log_c[m][d];
        for (int i = 0; i < n_dim; ++i) {
            x[i] += dirs[d].v[i];
            if (coord_of[i] < 0 && x[i] <= 0)
                throw SolverError("simulate_path: offset coordinate reached the boundary");
        }
        sample.jump_times.push_back(t);
        sample.states.push_back(centered(x));
    }
    sample.terminal = sample.states.back();
    return sample;
}

// sup_t ||Xi(t) - t beta||: the deviation is convex in t between jumps, so
// segment endpoints carry the supremum; no discretization error.
inline double path_sup_deviation(const TrajectorySample& sample, const Vec& beta) {
    double sup = 0.0;
    for (std::size_t k = 0; k < sample.states.size(); ++k) {
        double t0 = sample.jump_times[k];
        double t1 = (k + 1 < sample.jump_times.size()) ? sample.jump_times[k + 1] : 1.0;
        const Vec& x = sample.states[k];
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double a = x[i] - t0 * beta[i];
            double b = x[i] - t1 * beta[i];
            d0 += a * a;
            d1 += b * b;
        }
        sup = std::max(sup, std::sqrt(std::max(d0, d1)));
    }
    return sup;
}

namespace detail {

inline TubeEstimate reduce_tube(const Vec& weights, long n, long reps, const char* method) {
    TubeEstimate est;
    est.n = n;
    est.reps = reps;
    est.method = method;
    double sum = pairwise_sum(weights);
    Vec sq(weights.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = weights[i] * weights[i];
    double sumsq = pairwise_sum(sq);
    double r = static_cast<double>(reps);
    est.p_hat = std::clamp(sum / r, 0.0, 1.0);  // weighted means may overshoot 1
    double var = reps > 1 ? std::max(0.0, (sumsq - sum * sum / r) / (r - 1.0)) : 0.0;
    est.standard_error = std::sqrt(var / r);
    if (est.p_hat > 0.0) est.q_hat = -std::log(est.p_hat) / static_cast<double>(n);
    else est.flagged = true;
    return est;
}

}  // namespace detail

// Naive tube-probability estimate under the original law.
inline TubeEstimate estimate_tube_prob(const LocalModel& model, const SimConfig& cfg,
                                       int threads = 1) {
    if (cfg.control) throw std::invalid_argument("estimate_tube_prob: naive mode takes no control");
    cfg.check(model);
    Vec ind(cfg.reps, 0.0);
    detail::parallel_for(cfg.reps, threads, [&](long rep) {
        auto s = simulate_path(model, cfg, rep);
        ind[rep] = path_sup_deviation(s, cfg.beta) < cfg.epsilon ? 1.0 : 0.0;
    });
    auto est = detail::reduce_tube(ind, cfg.n, cfg.reps, "naive");
    return est;
}

// Importance-sampling estimate under tilted rates u = c* r, unbiased via
// per-path likelihood weights accumulated in log space.
inline TubeEstimate is_estimate(const LocalModel& model, const SimConfig& cfg, int threads = 1) {
    if (!cfg.control) throw std::invalid_argument("is_estimate: control required");
    cfg.check(model);
    Vec w(cfg.reps, 0.0);
    detail::parallel_for(cfg.reps, threads, [&](long rep) {
        auto s = simulate_path(model, cfg, rep);
        if (path_sup_deviation(s, cfg.beta) < cfg.epsilon) w[rep] = std::exp(s.log_weight);
    });
    return detail::reduce_tube(w, cfg.n, cfg.reps, "importance");
}

// Mean facet-occupation fractions over a batch of samples.
inline Vec empirical_occupancy(const std::vector<TrajectorySample>& samples) {
    if (samples.empty()) throw std::invalid_argument("empirical_occupancy: no samples");
    const std::size_t nf = samples.front().facet_occupancy.size();
    Vec out(nf, 0.0);
    for (std::size_t m = 0; m < nf; ++m) {
        Vec col(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s) col[s] = samples[s].facet_occupancy[m];
        out[m] = pairwise_sum(col) / static_cast<double>(samples.size());
    }
    return out;
}

struct LlnPoint {
    long n = 0;
    double p_exit = 0.0;
    double se = 0.0;
    Vec mean_terminal;
    Vec std_terminal;
};

struct LlnReport {
    std::vector<LlnPoint> points;
    bool exit_prob_monotone = false;  // non-increasing within 2 SE
    bool terminal_mean_ok = false;    // within a 3-sigma band of beta
};

// Empirical check that the tilted process tracks beta t: exit probabilities
// fall with n and terminal states concentrate around beta.
inline LlnReport lln_check(const LocalModel& model, const TiltVector& c, const Vec& beta,
                           const std::vector<long>& ns, long reps, double epsilon,
                           std::uint64_t seed, int threads = 1) {
    LlnReport rep;
    const int dim = model.dimension();
    for (long n : ns) {
        SimConfig cfg;
        cfg.n = n;
        cfg.reps = reps;
        cfg.seed = seed ^ (0x9e3779b9u + static_cast<std::uint64_t>(n));
        cfg.epsilon = epsilon;
        cfg.beta = beta;
        cfg.control = c;
        cfg.check(model);
        Vec exit(reps, 0.0);
        std::vector<Vec> terminals(reps);
        detail::parallel_for(reps, threads, [&](long r) {
            auto s = simulate_path(model, cfg, r);
            exit[r] = path_sup_deviation(s, beta) >= epsilon ? 1.0 : 0.0;
            terminals[r] = s.terminal;
        });
        LlnPoint pt;
        pt.n = n;
        double cnt = pairwise_sum(exit);
        pt.p_exit = cnt / static_cast<double>(reps);
        pt.se = std::sqrt(std::max(pt.p_exit * (1.0 - pt.p_exit), 1e-12) / static_cast<double>(reps));
        pt.mean_terminal.assign(dim, 0.0);
        pt.std_terminal.assign(dim, 0.0);
        for (int i = 0; i < dim; ++i) {
            Vec col(reps);
            for (long r = 0; r < reps; ++r) col[r] = terminals[r][i];
            double mean = pairwise_sum(col) / static_cast<double>(reps);
            Vec dev(reps);
            for (long r = 0; r < reps; ++r) dev[r] = (col[r] - mean) * (col[r] - mean);
            pt.mean_terminal[i] = mean;
            pt.std_terminal[i] = std::sqrt(pairwise_sum(dev) / std::max<double>(1.0, reps - 1.0));
        }
        rep.points.push_back(pt);
    }
    rep.exit_prob_monotone = true;
    for (std::size_t k = 1; k < rep.points.size(); ++k) {
        double slack = 2.0 * std::sqrt(rep.points[k].se * rep.points[k].se +
                                       rep.points[k - 1].se * rep.points[k - 1].se);
        if (rep.points[k].p_exit > rep.points[k - 1].p_exit + slack) rep.exit_prob_monotone = false;
    }
    rep.terminal_mean_ok = true;
    for (const auto& pt : rep.points)
        for (int i = 0; i < dim; ++i)
            if (std::fabs(pt.mean_terminal[i] - beta[i]) > 3.0 * std::max(pt.std_terminal[i], 1e-9))
                rep.terminal_mean_ok = false;
    return rep;
}

}  // namespace qrate

#endif
