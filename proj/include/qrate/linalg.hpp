#ifndef QRATE_LINALG_HPP
#define QRATE_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qrate {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for desk-scale problems (N <= ~16).
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

inline Vec operator+(Vec x, const Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    return x;
}

inline Vec operator-(Vec x, const Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    return x;
}

inline Vec operator*(double s, Vec x) {
    for (double& v : x) v *= s;
    return x;
}

inline void axpy(double s, const Vec& x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vec matvec(const Mat& m, const Vec& x) {
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) y[i] += m(i, j) * x[j];
    return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// Gaussian elimination with partial pivoting. Returns false on (near) singularity.
inline bool solve_dense(Mat m, Vec b, Vec& out) {
    const std::size_t n = m.rows;
    if (m.cols != n || b.size() != n) throw std::invalid_argument("solve_dense: shape mismatch");
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::fabs(m(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(m(i, k)) > best) { best = std::fabs(m(i, k)); p = i; }
        if (best < 1e-300) return false;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
            std::swap(b[k], b[p]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = m(i, k) / m(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
            b[i] -= f * b[k];
        }
    }
    out.assign(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= m(ii, j) * out[j];
        out[ii] = s / m(ii, ii);
    }
    return true;
}

inline Mat inverse(const Mat& m) {
    const std::size_t n = m.rows;
    Mat inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec e(n, 0.0), col;
        e[j] = 1.0;
        if (!solve_dense(m, e, col)) throw std::runtime_error("inverse: singular matrix");
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

inline double norm_inf_op(const Mat& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += std::fabs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

// Spectral radius of a nonnegative matrix via normalized repeated squaring:
// sigma = lim ||Q^(2^k)||^(1/2^k). Robust to reducible / defective spectra,
// which plain power iteration handles poorly.
inline double spectral_radius_nonneg(const Mat& q, double tol = 1e-12, int max_iter = 200) {
    if (q.rows != q.cols) throw std::invalid_argument("spectral_radius: square matrix required");
    Mat a = q;
    double log_sigma = 0.0;
    double weight = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        double r = norm_inf_op(a);
        if (r <= 0.0) return 0.0;
        log_sigma += weight * std::log(r);
        if (weight * std::fabs(std::log(r)) < tol && it > 4) break;
        for (double& v : a.a) v /= r;
        a = matmul(a, a);
        weight *= 0.5;
    }
    return std::exp(log_sigma);
}

// Gram-Schmidt orthonormal basis of span{vecs}; vectors below `tol` of the
// current span are dropped.
inline std::vector<Vec> orthonormal_basis(const std::vector<Vec>& vecs, double tol = 1e-10) {
    std::vector<Vec> basis;
    for (const Vec& v : vecs) {
        Vec w = v;
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) axpy(-dot(w, b), b, w);
        double n = norm2(w);
        if (n > tol * (1.0 + norm2(v))) {
            for (double& x : w) x /= n;
            basis.push_back(std::move(w));
        }
    }
    return basis;
}

inline Vec project_onto_span(const std::vector<Vec>& basis, const Vec& x) {
    Vec p(x.size(), 0.0);
    for (const Vec& b : basis) axpy(dot(x, b), b, p);
    return p;
}

struct NnlsResult {
    Vec alpha;
    double residual = 0.0;
};

// Exact small-scale NNLS: min ||sum_j alpha_j c_j - b|| over alpha >= 0,
// by enumerating supports (columns c_j given as vectors). Fine for q <= 16.
inline NnlsResult nnls_enumerate(const std::vector<Vec>& cols, const Vec& b) {
    const std::size_t m = cols.size();
    if (m > 20) throw std::invalid_argument("nnls_enumerate: too many columns");
    NnlsResult best;
    best.alpha.assign(m, 0.0);
    best.residual = norm2(b);
    for (std::uint32_t s = 1; s < (1u << m); ++s) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < m; ++j)
            if (s & (1u << j)) idx.push_back(j);
        const std::size_t k = idx.size();
        Mat g(k, k);
        Vec rhs(k, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            rhs[p] = dot(cols[idx[p]], b);
            for (std::size_t r = 0; r < k; ++r) g(p, r) = dot(cols[idx[p]], cols[idx[r]]);
            g(p, p) += 1e-13;
        }
        Vec sol;
        if (!solve_dense(g, rhs, sol)) continue;
        bool nonneg = true;
        for (double v : sol)
            if (v < -1e-12) { nonneg = false; break; }
        if (!nonneg) continue;
        Vec fit(b.size(), 0.0);
        for (std::size_t p = 0; p < k; ++p) axpy(std::max(sol[p], 0.0), cols[idx[p]], fit);
        double res = norm2(b - fit);
        if (res < best.residual) {
            best.residual = res;
            best.alpha.assign(m, 0.0);
            for (std::size_t p = 0; p < k; ++p) best.alpha[idx[p]] = std::max(sol[p], 0.0);
        }
    }
    return best;
}

// Euclidean projection onto the probability simplex {x >= 0, sum x = 1}.
inline Vec project_simplex(Vec x) {
    Vec u = x;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        css += u[i];
        double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) { rho = i + 1; theta = t; }
    }
    (void)rho;
    for (double& v : x) v = std::max(0.0, v - theta);
    return x;
}

// Pairwise (cascade) summation: deterministic reduction independent of the
// order replications were produced in.
inline double pairwise_sum(const Vec& x) {
    if (x.empty()) return 0.0;
    std::vector<double> buf(x);
    std::size_t n = buf.size();
    while (n > 1) {
        std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i < n / 2; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
        if (n % 2 == 1) buf[n / 2] = buf[n - 1];
        n = half;
    }
    return buf[0];
}

}  // namespace qrate

#endif
