#ifndef QRATE_LOCAL_MODEL_HPP
#define QRATE_LOCAL_MODEL_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrate/network.hpp"

namespace qrate {

enum class ModelFamily { jackson, processor_sharing };

// Tilt multipliers c_v >= 0, aligned with a model's direction order.
struct TiltVector {
    std::vector<double> c;

    static TiltVector ones(std::size_t ndirs) {
        TiltVector t;
        t.c.assign(ndirs, 1.0);
        return t;
    }
    static TiltVector zeros(std::size_t ndirs) {
        TiltVector t;
        t.c.assign(ndirs, 0.0);
        return t;
    }
    double operator[](std::size_t i) const { return c[i]; }
    double& operator[](std::size_t i) { return c[i]; }
    std::size_t size() const { return c.size(); }
};

// Localized model for an index set K: facet-indexed intensity table
// r_{I,v} over all I subset of K and the full direction set V.
class LocalModel {
public:
    LocalModel(const NetworkSpec& spec, IndexMask k);

    int dimension() const { return n_; }
    IndexMask k_mask() const { return k_; }
    const std::vector<int>& k_indices() const { return k_indices_; }
    ModelFamily family() const { return family_; }
    const NetworkSpec& spec() const { return spec_; }

    const std::vector<JumpDirection>& directions() const { return dirs_; }
    std::size_t facet_count() const { return rates_.size(); }

    int direction_index(const JumpDirection& v) const {
        for (std::size_t i = 0; i < dirs_.size(); ++i)
            if (dirs_[i] == v) return static_cast<int>(i);
        return -1;
    }

    // facet masks: global bitmask over coordinates, must be a subset of K
    int local_facet(IndexMask global_i) const {
        if ((global_i & ~k_) != 0) throw std::invalid_argument("facet not a subset of K");
        int m = 0;
        for (std::size_t b = 0; b < k_indices_.size(); ++b)
            if (global_i & (1u << k_indices_[b])) m |= (1 << b);
        return m;
    }
    IndexMask global_facet(int local) const {
        IndexMask g = 0;
        for (std::size_t b = 0; b < k_indices_.size(); ++b)
            if (local & (1 << b)) g |= (1u << k_indices_[b]);
        return g;
    }

    double rate(IndexMask global_i, std::size_t dir) const {
        return rates_[local_facet(global_i)][dir];
    }
    const std::vector<double>& facet_rates_local(int local_mask) const { return rates_[local_mask]; }
    const std::vector<double>& interior_rates() const { return rates_[0]; }

    double max_rate() const { return max_rate_; }

private:
    NetworkSpec spec_;
    ModelFamily family_;
    int n_ = 0;
    IndexMask k_ = 0;
    std::vector<int> k_indices_;
    std::vector<JumpDirection> dirs_;
    std::vector<std::vector<double>> rates_;  // [local facet mask][direction]
    double max_rate_ = 0.0;
};

inline LocalModel::LocalModel(const NetworkSpec& spec, IndexMask k) : spec_(spec), k_(k) {
    n_ = spec.size();
    family_ = spec.is_jackson() ? ModelFamily::jackson : ModelFamily::processor_sharing;
    if ((k & ~full_mask(n_)) != 0) throw std::invalid_argument("localize: K not within 1..N");
    k_indices_ = mask_to_indices(k);
    if (k_indices_.size() > 12)
        throw std::invalid_argument("localize: |K| > 12 is beyond desk scale (2^|K| facet table)");
    dirs_ = jump_directions(spec);

    const std::size_t nfacets = std::size_t{1} << k_indices_.size();
    rates_.assign(nfacets, std::vector<double>(dirs_.size(), 0.0));
    for (std::size_t m = 0; m < nfacets; ++m) {
        IndexMask gi = global_facet(static_cast<int>(m));
        // representative full-model state: 0 on I, 3 elsewhere
        StateVec x(n_, 3);
        for (int i : mask_to_indices(gi)) x[i] = 0;
        for (std::size_t d = 0; d < dirs_.size(); ++d) {
            double r = intensity(spec, x, dirs_[d]);
            // closed form cross-check; a mismatch means the model coding is wrong
            double closed;
            const auto& v = dirs_[d];
            if (spec.is_jackson()) {
                const auto& j = spec.jackson();
                if (v.is_arrival()) closed = j.a[v.pos_index()];
                else {
                    int i = v.neg_index();
                    bool idle = (gi & (1u << i)) != 0;
                    closed = idle ? 0.0
                                  : (v.is_exit() ? j.sigma[i] * j.p_exit(i)
                                                 : j.sigma[i] * j.p_route(i, v.pos_index()));
                }
            } else {
                const auto& ps = spec.ps();
                if (v.is_arrival()) closed = ps.a[v.pos_index()];
                else {
                    int i = v.neg_index();
                    bool idle = (gi & (1u << i)) != 0;
                    closed = idle ? 0.0 : ps.sigma[i] * ps.f[i] / detail::f_complement(ps, gi);
                }
            }
            if (std::fabs(r - closed) > 1e-12 * (1.0 + std::fabs(closed)))
                throw std::logic_error("localize: representative-state rate disagrees with closed form");
            rates_[m][d] = r;
            max_rate_ = std::max(max_rate_, r);
        }
    }
    // rates may only vanish at boundaries, never appear
    for (std::size_t m = 0; m < nfacets; ++m)
        for (std::size_t d = 0; d < dirs_.size(); ++d)
            if (rates_[0][d] == 0.0 && rates_[m][d] != 0.0)
                throw std::logic_error("localize: facet rate appears where interior rate is zero");
}

inline LocalModel localize(const NetworkSpec& spec, IndexMask k) { return LocalModel(spec, k); }

// Interior drift of the tilted process: sum_v c_v r_{empty,v} v.
inline Vec lln_drift(const LocalModel& model, const TiltVector& c) {
    Vec out(model.dimension(), 0.0);
    const auto& r0 = model.interior_rates();
    for (std::size_t d = 0; d < model.directions().size(); ++d)
        axpy(c[d] * r0[d], model.directions()[d].as_vec(), out);
    return out;
}

// sum_v c_v (r_{I,v} - r_{empty,v}) v  -- the boundary correction the
// Skorokhod construction must absorb on facet I.
inline Vec facet_drift_gap(const LocalModel& model, IndexMask global_i, const TiltVector& c) {
    Vec out(model.dimension(), 0.0);
    const auto& ri = model.facet_rates_local(model.local_facet(global_i));
    const auto& r0 = model.interior_rates();
    for (std::size_t d = 0; d < model.directions().size(); ++d)
        axpy(c[d] * (ri[d] - r0[d]), model.directions()[d].as_vec(), out);
    return out;
}

}  // namespace qrate

#endif
