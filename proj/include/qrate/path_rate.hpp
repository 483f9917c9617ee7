#ifndef QRATE_PATH_RATE_HPP
#define QRATE_PATH_RATE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "qrate/rate_solver.hpp"

namespace qrate {

// Piecewise linear path on [0,1] staying in the nonnegative orthant.
struct PiecewisePath {
    Vec times;                // 0 = t_0 < ... < t_m = 1
    std::vector<Vec> values;  // x_k at each breakpoint

    // Skorokhod inputs may leave the orthant; the path functional's may not.
    void check(bool require_orthant = true) const {
        if (times.size() < 2 || times.size() != values.size())
            throw std::invalid_argument("path: need matching breakpoints, at least two");
        if (std::fabs(times.front()) > 1e-12 || std::fabs(times.back() - 1.0) > 1e-12)
            throw std::invalid_argument("path: time range must be [0,1]");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (times[k] <= times[k - 1]) throw std::invalid_argument("path: times not increasing");
        if (!require_orthant) return;
        for (const auto& x : values)
            for (double xi : x)
                if (xi < -1e-12) throw std::invalid_argument("path leaves the orthant");
    }

    Vec at(double t) const {
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        std::size_t k = 1;
        while (times[k] < t) ++k;
        double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        Vec out = values[k - 1];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (values[k][i] - out[i]);
        return out;
    }
};

struct PathSegmentCost {
    double t0 = 0.0, t1 = 0.0;
    IndexMask facet = 0;
    Vec slope;
    double local_rate = 0.0;  // L at the segment's facet and slope
};

struct PathRateResult {
    double value = 0.0;
    std::vector<PathSegmentCost> segments;
};

// J_x(phi) = integral of L(phi(t), phi'(t)) dt. Segments are refined at
// every zero crossing so the active facet is constant on each piece.
inline PathRateResult path_rate_detailed(const NetworkSpec& spec, const PiecewisePath& phi) {
    phi.check();
    const int n = spec.size();
    PathRateResult out;
    for (std::size_t k = 1; k < phi.times.size(); ++k) {
        double t0 = phi.times[k - 1], t1 = phi.times[k];
        const Vec& x0 = phi.values[k - 1];
        const Vec& x1 = phi.values[k];
        double len = t1 - t0;
        Vec slope(n, 0.0);
        for (int i = 0; i < n; ++i) slope[i] = (x1[i] - x0[i]) / len;

        // split where coordinates cross zero (exact from the linear segment)
        std::vector<double> cuts{t0, t1};
        for (int i = 0; i < n; ++i) {
            if (slope[i] == 0.0) continue;
            double tc = t0 - x0[i] / slope[i];
            if (tc > t0 + 1e-12 && tc < t1 - 1e-12) cuts.push_back(tc);
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t s = 1; s < cuts.size(); ++s) {
            double a = cuts[s - 1], b = cuts[s];
            if (b - a < 1e-12) continue;
            double tm = 0.5 * (a + b);
            Vec xm(n, 0.0);
            for (int i = 0; i < n; ++i) {
                xm[i] = x0[i] + (tm - t0) * slope[i];
                if (std::fabs(xm[i]) < 1e-9 && std::fabs(slope[i]) < 1e-12) xm[i] = 0.0;
                xm[i] = std::max(xm[i], 0.0);
            }
            PathSegmentCost seg;
            seg.t0 = a;
            seg.t1 = b;
            seg.slope = slope;
            seg.facet = facet_index(xm, full_mask(n), 1e-9);
            auto sol = local_rate(spec, seg.facet, slope);
            seg.local_rate = sol.value;
            out.segments.push_back(seg);
            out.value += (b - a) * seg.local_rate;
            if (!std::isfinite(out.value)) {
                out.value = kInf;
                return out;
            }
        }
    }
    return out;
}

inline double path_rate(const NetworkSpec& spec, const PiecewisePath& phi) {
    return path_rate_detailed(spec, phi).value;
}

}  // namespace qrate

#endif
