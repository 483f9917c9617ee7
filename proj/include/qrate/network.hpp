#ifndef QRATE_NETWORK_HPP
#define QRATE_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "qrate/linalg.hpp"

namespace qrate {

using StateVec = std::vector<long long>;  // lattice states, coordinates >= 0
using IndexMask = std::uint32_t;          // bit i set <=> coordinate i+1 in the set

constexpr double kFacetTol = 1e-12;

inline IndexMask full_mask(int n) { return (n >= 32) ? ~0u : ((1u << n) - 1u); }

inline std::vector<int> mask_to_indices(IndexMask m) {
    std::vector<int> out;
    for (int i = 0; i < 32; ++i)
        if (m & (1u << i)) out.push_back(i);
    return out;
}

inline IndexMask indices_to_mask(const std::vector<int>& idx) {
    IndexMask m = 0;
    for (int i : idx) m |= (1u << i);
    return m;
}

inline int popcount(IndexMask m) {
    int c = 0;
    while (m) { m &= m - 1; ++c; }
    return c;
}

// One allowed jump: e_i, -e_i, or e_j - e_i (routing i -> j).
struct JumpDirection {
    std::vector<int> v;

    bool operator==(const JumpDirection& o) const { return v == o.v; }
    bool operator<(const JumpDirection& o) const { return v < o.v; }

    static JumpDirection plus_e(int i, int n) {
        JumpDirection d;
        d.v.assign(n, 0);
        d.v[i] = 1;
        return d;
    }
    static JumpDirection minus_e(int i, int n) {
        JumpDirection d;
        d.v.assign(n, 0);
        d.v[i] = -1;
        return d;
    }
    // e_{i,j} = e_j - e_i
    static JumpDirection route(int i, int j, int n) {
        JumpDirection d;
        d.v.assign(n, 0);
        d.v[i] = -1;
        d.v[j] = 1;
        return d;
    }

    // index of the unique +1 entry, or -1
    int pos_index() const {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] == 1) return static_cast<int>(i);
        return -1;
    }
    int neg_index() const {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] == -1) return static_cast<int>(i);
        return -1;
    }
    bool is_arrival() const { return neg_index() < 0 && pos_index() >= 0; }
    bool is_exit() const { return pos_index() < 0 && neg_index() >= 0; }
    bool is_route() const { return pos_index() >= 0 && neg_index() >= 0; }

    bool well_formed() const {
        int nonzero = 0;
        for (int x : v) {
            if (x != 0 && x != 1 && x != -1) return false;
            if (x != 0) ++nonzero;
        }
        return nonzero >= 1 && nonzero <= 2 && !(nonzero == 2 && pos_index() < 0) &&
               !(nonzero == 2 && neg_index() < 0);
    }

    Vec as_vec() const { return Vec(v.begin(), v.end()); }

    // canonical text form: "+i", "-i", "i>j" (1-based)
    std::string name() const {
        std::ostringstream os;
        if (is_arrival()) os << "+" << pos_index() + 1;
        else if (is_exit()) os << "-" << neg_index() + 1;
        else os << neg_index() + 1 << ">" << pos_index() + 1;
        return os.str();
    }

    static std::optional<JumpDirection> parse(const std::string& s, int n) {
        if (s.empty()) return std::nullopt;
        auto in_range = [n](int i) { return i >= 1 && i <= n; };
        if (s[0] == '+' || s[0] == '-') {
            int i = std::atoi(s.c_str() + 1);
            if (!in_range(i)) return std::nullopt;
            return s[0] == '+' ? plus_e(i - 1, n) : minus_e(i - 1, n);
        }
        auto pos = s.find('>');
        if (pos == std::string::npos) return std::nullopt;
        int i = std::atoi(s.substr(0, pos).c_str());
        int j = std::atoi(s.substr(pos + 1).c_str());
        if (!in_range(i) || !in_range(j) || i == j) return std::nullopt;
        return route(i - 1, j - 1, n);
    }
};

// Open Jackson network. Routing is stored as an N x (N+1) matrix whose
// column 0 holds the exit probabilities p_{i,0}, so row-stochasticity is a
// single per-row check.
struct JacksonSpec {
    int N = 0;
    Vec a;          // exogenous arrival rates, >= 0
    Vec sigma;      // service rates, > 0
    Mat routing;    // N x (N+1); (i,0) = p_{i,0}, (i,j) = p_{i,j} for j >= 1

    double p_exit(int i) const { return routing(i, 0); }
    double p_route(int i, int j) const { return routing(i, j + 1); }
};

// Single server shared by N customer classes; class i is guaranteed the
// capacity fraction f_i, and idle capacity is redistributed proportionally.
struct ProcessorSharingSpec {
    int N = 0;
    Vec a;      // arrival rates, > 0
    Vec sigma;  // service rates, > 0
    Vec f;      // capacity fractions, > 0, summing to 1
};

struct NetworkSpec {
    std::variant<JacksonSpec, ProcessorSharingSpec> model;

    bool is_jackson() const { return std::holds_alternative<JacksonSpec>(model); }
    const JacksonSpec& jackson() const { return std::get<JacksonSpec>(model); }
    const ProcessorSharingSpec& ps() const { return std::get<ProcessorSharingSpec>(model); }
    int size() const { return is_jackson() ? jackson().N : ps().N; }
};

// I(x) within K: coordinates of K that sit on the boundary. Integer states
// use the exact zero test.
inline IndexMask facet_index(const StateVec& x, IndexMask k) {
    IndexMask m = 0;
    for (int i : mask_to_indices(k)) {
        if (x[i] < 0) throw std::invalid_argument("facet_index: negative coordinate");
        if (x[i] == 0) m |= (1u << i);
    }
    return m;
}

inline IndexMask facet_index(const Vec& x, IndexMask k, double tol = kFacetTol) {
    IndexMask m = 0;
    for (int i : mask_to_indices(k)) {
        if (x[i] < -tol) throw std::invalid_argument("facet_index: negative coordinate");
        if (std::fabs(x[i]) <= tol) m |= (1u << i);
    }
    return m;
}

inline std::vector<JumpDirection> jump_directions(const NetworkSpec& spec) {
    std::vector<JumpDirection> dirs;
    const int n = spec.size();
    if (spec.is_jackson()) {
        const auto& j = spec.jackson();
        for (int i = 0; i < n; ++i) {
            if (j.a[i] > 0.0) dirs.push_back(JumpDirection::plus_e(i, n));
            if (j.p_exit(i) > 0.0) dirs.push_back(JumpDirection::minus_e(i, n));
            for (int k = 0; k < n; ++k)
                if (k != i && j.p_route(i, k) > 0.0) dirs.push_back(JumpDirection::route(i, k, n));
        }
    } else {
        for (int i = 0; i < n; ++i) {
            dirs.push_back(JumpDirection::plus_e(i, n));
            dirs.push_back(JumpDirection::minus_e(i, n));
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

namespace detail {

inline double f_complement(const ProcessorSharingSpec& ps, IndexMask active) {
    double s = 0.0;
    for (int i = 0; i < ps.N; ++i)
        if (!(active & (1u << i))) s += ps.f[i];
    return s;
}

}  // namespace detail

// Jump intensity r(x, v) of the full model. Zero whenever x + v would leave
// the orthant, matching the boundary convention of the state space.
inline double intensity(const NetworkSpec& spec, const StateVec& x, const JumpDirection& v) {
    const int n = spec.size();
    for (int i = 0; i < n; ++i)
        if (x[i] < 0) throw std::invalid_argument("intensity: state outside the orthant");
    for (int i = 0; i < n; ++i)
        if (x[i] + v.v[i] < 0) return 0.0;
    IndexMask I = facet_index(x, full_mask(n));
    if (spec.is_jackson()) {
        const auto& j = spec.jackson();
        if (v.is_arrival()) return j.a[v.pos_index()];
        int i = v.neg_index();
        if (I & (1u << i)) return 0.0;
        if (v.is_exit()) return j.sigma[i] * j.p_exit(i);
        return j.sigma[i] * j.p_route(i, v.pos_index());
    }
    const auto& ps = spec.ps();
    if (v.is_arrival()) return ps.a[v.pos_index()];
    if (v.is_route()) return 0.0;
    int i = v.neg_index();
    if (I & (1u << i)) return 0.0;
    double fc = detail::f_complement(ps, I);
    return ps.sigma[i] * ps.f[i] / fc;
}

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

namespace detail {

// strong connectivity of the positive-probability digraph (coordinates as nodes)
inline bool strongly_connected(int n, const std::vector<std::vector<int>>& adj,
                               const std::vector<std::vector<int>>& radj) {
    if (n <= 1) return true;
    auto reaches_all = [n](const std::vector<std::vector<int>>& g) {
        std::vector<char> seen(n, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int w : g[u])
                if (!seen[w]) { seen[w] = 1; ++count; q.push(w); }
        }
        return count == n;
    };
    return reaches_all(adj) && reaches_all(radj);
}

}  // namespace detail

inline ValidationReport validate(const NetworkSpec& spec) {
    ValidationReport rep;
    const int n = spec.size();
    if (n <= 0) {
        rep.violations.push_back("empty model");
        return rep;
    }
    if (spec.is_jackson()) {
        const auto& j = spec.jackson();
        if (static_cast<int>(j.a.size()) != n || static_cast<int>(j.sigma.size()) != n ||
            j.routing.rows != static_cast<std::size_t>(n) ||
            j.routing.cols != static_cast<std::size_t>(n + 1)) {
            rep.violations.push_back("jackson: field sizes inconsistent with N");
            return rep;
        }
        bool some_arrival = false, some_exit = false;
        for (int i = 0; i < n; ++i) {
            if (j.a[i] < 0.0) rep.violations.push_back("arrival rate a[" + std::to_string(i + 1) + "] < 0");
            if (j.a[i] > 0.0) some_arrival = true;
            if (j.sigma[i] <= 0.0) rep.violations.push_back("service rate sigma[" + std::to_string(i + 1) + "] <= 0");
            double row = 0.0;
            for (int c = 0; c <= n; ++c) {
                if (j.routing(i, c) < 0.0)
                    rep.violations.push_back("routing entry (" + std::to_string(i + 1) + "," + std::to_string(c) + ") < 0");
                row += j.routing(i, c);
            }
            if (std::fabs(row - 1.0) > 1e-12)
                rep.violations.push_back("routing row " + std::to_string(i + 1) + " does not sum to 1");
            if (j.p_exit(i) > 0.0) some_exit = true;
        }
        if (!some_arrival) rep.violations.push_back("no arrivals: a_i = 0 for all i");
        if (!some_exit) rep.violations.push_back("no exit node: p_{i,0} = 0 for all i");
        std::vector<std::vector<int>> adj(n), radj(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                if (i != k && j.p_route(i, k) > 0.0) {
                    adj[i].push_back(k);
                    radj[k].push_back(i);
                }
        if (!detail::strongly_connected(n, adj, radj))
            rep.violations.push_back("irreducibility: routing sub-matrix is not irreducible");
    } else {
        const auto& ps = spec.ps();
        if (static_cast<int>(ps.a.size()) != n || static_cast<int>(ps.sigma.size()) != n ||
            static_cast<int>(ps.f.size()) != n) {
            rep.violations.push_back("processor_sharing: field sizes inconsistent with N");
            return rep;
        }
        double fsum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (ps.a[i] <= 0.0) rep.violations.push_back("arrival rate a[" + std::to_string(i + 1) + "] <= 0");
            if (ps.sigma[i] <= 0.0) rep.violations.push_back("service rate sigma[" + std::to_string(i + 1) + "] <= 0");
            if (ps.f[i] <= 0.0) rep.violations.push_back("capacity fraction f[" + std::to_string(i + 1) + "] <= 0");
            fsum += ps.f[i];
        }
        if (std::fabs(fsum - 1.0) > 1e-12) rep.violations.push_back("f does not sum to 1");
    }
    if (!rep.ok()) return rep;

    // Rates must be constant on each facet and finitely supported there.
    // Sampled structurally: two distinct representatives per facet.
    auto dirs = jump_directions(spec);
    IndexMask fm = full_mask(n);
    std::vector<IndexMask> masks;
    if (n <= 10) {
        for (IndexMask m = 0; m <= fm; ++m) masks.push_back(m);
    } else {
        masks.push_back(0);
        masks.push_back(fm);
        std::uint64_t h = 0x12345;
        for (int t = 0; t < 200; ++t) {
            h = h * 6364136223846793005ULL + 1442695040888963407ULL;
            masks.push_back(static_cast<IndexMask>(h) & fm);
        }
    }
    for (IndexMask m : masks) {
        StateVec x1(n), x2(n);
        for (int i = 0; i < n; ++i) {
            bool on = (m & (1u << i)) != 0;
            x1[i] = on ? 0 : 2;
            x2[i] = on ? 0 : 7;
        }
        for (const auto& v : dirs) {
            if (std::fabs(intensity(spec, x1, v) - intensity(spec, x2, v)) > 1e-12) {
                rep.violations.push_back("rates not constant on facet mask " + std::to_string(m));
                break;
            }
        }
    }
    return rep;
}

struct CommResult {
    bool reachable = false;
    long steps = 0;
    std::string failure;
};

namespace detail {

// shortest routing chain i -> j in the positive digraph (BFS, self-avoiding)
inline std::vector<int> routing_chain(const JacksonSpec& j, int from, int to) {
    if (from == to) return {from};
    const int n = j.N;
    std::vector<int> prev(n, -1);
    std::queue<int> q;
    q.push(from);
    prev[from] = from;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int w = 0; w < n; ++w)
            if (w != u && j.p_route(u, w) > 0.0 && prev[w] < 0) {
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

// Construct an explicit connecting sequence x -> y with positive intensities
// along every step, and report its length J (asserted <= (N+1) * |x-y|_1).
inline CommResult check_communication(const NetworkSpec& spec, StateVec x, const StateVec& y) {
    CommResult res;
    const int n = spec.size();
    long l1 = 0;
    for (int i = 0; i < n; ++i) l1 += std::llabs(x[i] - y[i]);
    if (l1 == 0) {
        res.reachable = true;
        return res;
    }

    std::vector<JumpDirection> seq;
    auto move = [&](const JumpDirection& v) { seq.push_back(v); };

    if (!spec.is_jackson()) {
        // coordinate moves: drain surpluses, then fill deficits
        for (int i = 0; i < n; ++i)
            for (long long k = x[i]; k > y[i]; --k) move(JumpDirection::minus_e(i, n));
        for (int i = 0; i < n; ++i)
            for (long long k = x[i]; k < y[i]; ++k) move(JumpDirection::plus_e(i, n));
    } else {
        const auto& j = spec.jackson();
        StateVec target = y;
        std::vector<JumpDirection> tail;
        long long delta = 0;
        for (int i = 0; i < n; ++i) delta += y[i] - x[i];
        if (delta > 0) {
            int src = -1;
            for (int i = 0; i < n; ++i)
                if (j.a[i] > 0.0) { src = i; break; }
            for (long long k = 0; k < delta; ++k) move(JumpDirection::plus_e(src, n));
            // arrivals first; then rebalance on the simplex
        } else if (delta < 0) {
            int snk = -1;
            for (int i = 0; i < n; ++i)
                if (j.p_exit(i) > 0.0) { snk = i; break; }
            target[snk] += -delta;
            for (long long k = 0; k < -delta; ++k) tail.push_back(JumpDirection::minus_e(snk, n));
        }
        // replay the arrival padding onto a working copy to find the simplex start
        StateVec cur = x;
        for (const auto& v : seq)
            for (int i = 0; i < n; ++i) cur[i] += v.v[i];
        // neighbor swaps along routing chains until cur == target
        for (int guard = 0; guard < 1 << 20; ++guard) {
            int from = -1, to = -1;
            for (int i = 0; i < n; ++i) {
                if (cur[i] > target[i]) from = i;
                if (cur[i] < target[i]) to = i;
            }
            if (from < 0 && to < 0) break;
            auto chain = detail::routing_chain(j, from, to);
            if (chain.empty()) {
                res.failure = "no routing chain " + std::to_string(from + 1) + "->" + std::to_string(to + 1);
                return res;
            }
            for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
                move(JumpDirection::route(chain[k], chain[k + 1], n));
                cur[chain[k]] -= 1;
                cur[chain[k + 1]] += 1;
            }
        }
        for (const auto& v : tail) move(v);
    }

    // verify every step has positive intensity
    StateVec cur = x;
    for (const auto& v : seq) {
        if (intensity(spec, cur, v) <= 0.0) {
            res.failure = "zero-intensity step " + v.name();
            return res;
        }
        for (int i = 0; i < n; ++i) cur[i] += v.v[i];
    }
    if (cur != y) {
        res.failure = "construction did not reach the target state";
        return res;
    }
    res.reachable = true;
    res.steps = static_cast<long>(seq.size());
    if (res.steps > (n + 1) * l1) {
        res.reachable = false;
        res.failure = "sequence exceeds the (N+1)|x-y|_1 bound";
    }
    return res;
}

}  // namespace qrate

#endif
