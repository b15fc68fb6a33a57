#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "relent/errors.hpp"

// Small dense real matrices. Everything here targets state spaces of at most
// a few hundred states, so plain O(n^3) kernels are used throughout and no
// sparsity is exploited.

namespace relent {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a; // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

inline Matrix operator*(const Matrix& x, const Matrix& y) {
    Matrix z(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xik = x(i, k);
            if (xik == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) z(i, j) += xik * y(k, j);
        }
    }
    return z;
}

inline std::vector<double> operator*(const Matrix& m, const std::vector<double>& v) {
    std::vector<double> w(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        w[i] = s;
    }
    return w;
}

/// Row vector times matrix.
inline std::vector<double> operator*(const std::vector<double>& v, const Matrix& m) {
    std::vector<double> w(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) w[j] += vi * m(i, j);
    }
    return w;
}

inline double max_abs(const Matrix& m) {
    double s = 0.0;
    for (double x : m.a) s = std::max(s, std::abs(x));
    return s;
}

inline double inf_norm(const Matrix& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) row += std::abs(m(i, j));
        best = std::max(best, row);
    }
    return best;
}

/// Solves A x = b by LU with partial pivoting. Throws numeric_error on a
/// numerically singular pivot.
inline std::vector<double> solve_linear(Matrix A, std::vector<double> b) {
    const std::size_t n = A.rows;
    if (A.cols != n || b.size() != n) throw numeric_error("solve_linear: shape mismatch");
    const double scale = std::max(max_abs(A), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(A(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(A(i, k));
            if (v > best) { best = v; piv = i; }
        }
        if (best <= 1e-14 * scale)
            throw numeric_error("solve_linear: matrix is singular to working precision");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A(i, k) / A(k, k);
            if (f == 0.0) continue;
            A(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= A(ii, j) * x[j];
        x[ii] = s / A(ii, ii);
    }
    return x;
}

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
/// The series is run to machine precision on the scaled matrix, giving
/// entrywise errors well below 1e-12 at the scales used here.
inline Matrix expm(const Matrix& A) {
    const std::size_t n = A.rows;
    if (A.cols != n) throw numeric_error("expm: matrix must be square");
    const double norm = inf_norm(A);
    int squarings = 0;
    if (norm > 0.25) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
        squarings = std::min(squarings, 64);
    }
    const double scale = std::ldexp(1.0, -squarings);
    Matrix B(n, n);
    for (std::size_t i = 0; i < n * n; ++i) B.a[i] = A.a[i] * scale;

    Matrix result = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    for (int k = 1; k <= 40; ++k) {
        term = term * B;
        for (std::size_t i = 0; i < n * n; ++i) term.a[i] /= static_cast<double>(k);
        double tmax = 0.0;
        for (std::size_t i = 0; i < n * n; ++i) {
            result.a[i] += term.a[i];
            tmax = std::max(tmax, std::abs(term.a[i]));
        }
        if (tmax < 1e-17 * std::max(1.0, max_abs(result))) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

struct PerronResult {
    double value = 0.0;            // principal eigenvalue
    std::vector<double> vec;       // positive right eigenvector, 1-normalized
    std::size_t iterations = 0;
};

/// Principal (Perron) eigenvalue of an entrywise nonnegative primitive
/// matrix via power iteration, with Collatz-Wielandt brackets as the
/// stopping rule: min_i (Av)_i/v_i <= lambda <= max_i (Av)_i/v_i for v > 0.
/// Throws numeric_error if the bracket has not closed to `tol` after
/// `max_iter` iterations and is not already at the rounding floor.
inline PerronResult perron_root(const Matrix& M, double tol = 1e-12,
                                std::size_t max_iter = 1000000) {
    const std::size_t n = M.rows;
    if (M.cols != n || n == 0) throw numeric_error("perron_root: matrix must be square");
    for (double x : M.a)
        if (x < 0.0) throw numeric_error("perron_root: matrix has a negative entry");

    std::vector<double> v(n, 1.0 / static_cast<double>(n));
    const double scale = std::max(inf_norm(M), 1e-300);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        std::vector<double> w = M * v;
        lo = std::numeric_limits<double>::infinity();
        hi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (v[i] <= 0.0) { lo = 0.0; hi = std::numeric_limits<double>::infinity(); break; }
            const double r = w[i] / v[i];
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        double sum = 0.0;
        for (double x : w) sum += x;
        if (sum <= 0.0) throw numeric_error("perron_root: iterate collapsed to zero");
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / sum;
        if (std::isfinite(hi) && hi - lo <= tol * std::max(1.0, std::abs(hi))) break;
    }
    const double lam = 0.5 * (lo + hi);
    if (hi - lo > tol * std::max(1.0, std::abs(lam))) {
        // accept a bracket at the rounding floor, else report divergence
        if (!(hi - lo <= 1e2 * std::numeric_limits<double>::epsilon() * scale))
            throw numeric_error("perron_root: power iteration did not converge");
    }
    return PerronResult{lam, std::move(v), it};
}

namespace detail {

// Eigenvalues of a real 2x2 block.
inline void eig2x2(double a, double b, double c, double d,
                   std::complex<double>& l1, std::complex<double>& l2) {
    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = tr * tr / 4.0 - det;
    if (disc >= 0.0) {
        const double root = std::sqrt(disc);
        // stable pairing: larger-magnitude root first, mate from the determinant
        const double m = tr / 2.0 + (tr >= 0.0 ? root : -root);
        if (m == 0.0) { l1 = 0.0; l2 = 0.0; }
        else { l1 = m; l2 = det / m; }
    } else {
        const double im = std::sqrt(-disc);
        l1 = {tr / 2.0, im};
        l2 = {tr / 2.0, -im};
    }
}

inline std::vector<std::complex<double>> sort_eigs(std::vector<std::complex<double>> v) {
    std::sort(v.begin(), v.end(), [](const std::complex<double>& p, const std::complex<double>& q) {
        if (p.real() != q.real()) return p.real() > q.real();
        return p.imag() > q.imag();
    });
    return v;
}

} // namespace detail

/// All eigenvalues of a real square matrix, sorted by descending real part:
/// Householder reduction to upper Hessenberg form followed by the Francis
/// implicit double-shift QR iteration (eigenvalues only, no Schur vectors).
inline std::vector<std::complex<double>> eigenvalues(Matrix A) {
    const std::size_t n = A.rows;
    if (A.cols != n) throw numeric_error("eigenvalues: matrix must be square");
    std::vector<std::complex<double>> out;
    out.reserve(n);
    if (n == 0) return out;
    if (n == 1) { out.emplace_back(A(0, 0)); return out; }

    const double eps = std::numeric_limits<double>::epsilon();

    // Householder reduction to Hessenberg form.
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm += A(i, k) * A(i, k);
        xnorm = std::sqrt(xnorm);
        if (xnorm == 0.0) continue;
        const double alpha = (A(k + 1, k) >= 0.0 ? -xnorm : xnorm);
        std::vector<double> u(n, 0.0);
        u[k + 1] = A(k + 1, k) - alpha;
        for (std::size_t i = k + 2; i < n; ++i) u[i] = A(i, k);
        double unorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) unorm2 += u[i] * u[i];
        if (unorm2 == 0.0) continue;
        // A <- P A P with P = I - 2uu^T/(u^Tu)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += u[i] * A(i, j);
            s = 2.0 * s / unorm2;
            for (std::size_t i = k + 1; i < n; ++i) A(i, j) -= s * u[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += A(i, j) * u[j];
            s = 2.0 * s / unorm2;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= s * u[j];
        }
        for (std::size_t i = k + 2; i < n; ++i) A(i, k) = 0.0;
    }

    auto offdiag_small = [&](std::size_t i) {
        const double s = std::abs(A(i - 1, i - 1)) + std::abs(A(i, i));
        return std::abs(A(i, i - 1)) <= eps * std::max(s, 1e-290);
    };

    std::size_t hi = n - 1;
    std::size_t since_deflation = 0;
    const std::size_t iter_cap = 60 * n;
    std::size_t total_iter = 0;

    while (true) {
        // deflate converged 1x1 and 2x2 trailing blocks
        bool deflated = true;
        while (deflated) {
            deflated = false;
            if (hi == 0) { out.emplace_back(A(0, 0)); return detail::sort_eigs(std::move(out)); }
            if (offdiag_small(hi)) {
                out.emplace_back(A(hi, hi));
                --hi;
                since_deflation = 0;
                deflated = true;
                continue;
            }
            if (hi == 1 || offdiag_small(hi - 1)) {
                std::complex<double> l1, l2;
                detail::eig2x2(A(hi - 1, hi - 1), A(hi - 1, hi), A(hi, hi - 1), A(hi, hi), l1, l2);
                out.push_back(l1);
                out.push_back(l2);
                if (hi == 1) return detail::sort_eigs(std::move(out));
                hi -= 2;
                since_deflation = 0;
                deflated = true;
            }
        }
        // here the trailing unreduced block has size >= 3, so hi >= 2

        if (++total_iter > iter_cap)
            throw numeric_error("eigenvalues: QR iteration did not converge");

        std::size_t lo = hi - 1;
        while (lo > 0 && !offdiag_small(lo)) --lo;

        // implicit double shift from the trailing 2x2; ad-hoc exceptional
        // shift every 12 stalled sweeps
        double s, t;
        ++since_deflation;
        if (since_deflation % 12 == 0) {
            const double w = std::abs(A(hi, hi - 1)) + std::abs(A(hi - 1, hi - 2));
            s = 1.5 * w;
            t = -0.4375 * w * w;
        } else {
            s = A(hi - 1, hi - 1) + A(hi, hi);
            t = A(hi - 1, hi - 1) * A(hi, hi) - A(hi - 1, hi) * A(hi, hi - 1);
        }

        // first column of H^2 - sH + tI on the block
        double x = A(lo, lo) * A(lo, lo) + A(lo, lo + 1) * A(lo + 1, lo) - s * A(lo, lo) + t;
        double y = A(lo + 1, lo) * (A(lo, lo) + A(lo + 1, lo + 1) - s);
        double z = A(lo + 1, lo) * A(lo + 2, lo + 1);

        for (std::size_t k = lo; k + 1 <= hi; ++k) {
            const double vnorm = std::sqrt(x * x + y * y + z * z);
            if (vnorm != 0.0) {
                const double alpha = (x >= 0.0 ? -vnorm : vnorm);
                const double u0 = x - alpha, u1 = y, u2 = z;
                const double un2 = u0 * u0 + u1 * u1 + u2 * u2;
                if (un2 > 0.0) {
                    const bool third = (k + 2 <= hi);
                    const std::size_t jfirst = (k > lo ? k - 1 : lo);
                    for (std::size_t j = jfirst; j < n; ++j) {
                        double acc = u0 * A(k, j) + u1 * A(k + 1, j) + (third ? u2 * A(k + 2, j) : 0.0);
                        acc = 2.0 * acc / un2;
                        A(k, j) -= acc * u0;
                        A(k + 1, j) -= acc * u1;
                        if (third) A(k + 2, j) -= acc * u2;
                    }
                    const std::size_t ilast = std::min(hi, k + 3);
                    for (std::size_t i = 0; i <= ilast; ++i) {
                        double acc = u0 * A(i, k) + u1 * A(i, k + 1) + (third ? u2 * A(i, k + 2) : 0.0);
                        acc = 2.0 * acc / un2;
                        A(i, k) -= acc * u0;
                        A(i, k + 1) -= acc * u1;
                        if (third) A(i, k + 2) -= acc * u2;
                    }
                }
            }
            x = A(k + 1, k);
            y = (k + 2 <= hi) ? A(k + 2, k) : 0.0;
            z = (k + 3 <= hi) ? A(k + 3, k) : 0.0;
        }
        // the chase leaves only rounding noise below the first subdiagonal
        for (std::size_t i = lo + 2; i <= hi; ++i)
            for (std::size_t j = lo; j + 2 <= i; ++j) A(i, j) = 0.0;
    }
}

} // namespace relent
