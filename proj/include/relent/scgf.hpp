#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relent/errors.hpp"
#include "relent/linalg.hpp"
#include "relent/model.hpp"

// Scaled cumulant generating functions for the log-likelihood ratio between
// two chains, in two variants: the continuous-time curve E(p) (principal
// eigenvalue of the tilted generator) and its fixed-step counterpart F_d(p)
// built from the two discretized transition matrices. Their Legendre
// transforms give the large-deviation rate functions.

namespace relent {

enum class ScgfKind { continuous, discrete };

struct ScgfCurve {
    ScgfKind kind = ScgfKind::continuous;
    double delta = 0.0; // 0 for the continuous curve
    std::vector<double> p;
    std::vector<double> value;
    double c_minus = 0.0; // one-sided slopes near the ends of (-1,1)
    double c_plus = 0.0;
    std::function<double(double)> eval; // pointwise evaluator off the grid
};

struct RateFunction {
    std::vector<double> q;
    std::vector<double> value;
    double c_minus = 0.0;
    double c_plus = 0.0;
};

/// Default evaluation grid: 41 points on [-0.95, 0.95].
inline std::vector<double> default_p_grid() {
    std::vector<double> g(41);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = -0.95 + 1.9 * static_cast<double>(i) / 40.0;
    return g;
}

namespace detail {

inline void check_absolute_continuity(const CtmcModel& x, const CtmcModel& y) {
    for (std::size_t a = 0; a < x.size(); ++a)
        for (std::size_t b = 0; b < x.size(); ++b)
            if (a != b && x.rate(a, b) > 0.0 && y.rate(a, b) == 0.0)
                throw absolute_continuity_error(
                    "tilted generator: transition '" + x.states[a] + "'->'" + x.states[b] +
                    "' has positive rate in the base model but zero in the comparison model");
}

inline double max_escape_rate(const CtmcModel& x, const CtmcModel& y) {
    double m = 0.0;
    for (double c : x.escape_rates) m = std::max(m, c);
    for (double c : y.escape_rates) m = std::max(m, c);
    return m;
}

} // namespace detail

/// E(p): principal eigenvalue of the matrix with off-diagonal entries
/// cx(a) px(a,b) * [cx(a) px(a,b) / (cy(a) py(a,b))]^p and diagonal
/// -cx(a) - p (cx(a) - cy(a)). Computed by power iteration after the
/// diagonal shift sigma = (1+|p|) max_rate + 1, which makes the matrix
/// entrywise nonnegative with a strictly positive diagonal.
inline double continuous_scgf_value(const CtmcModel& x, const CtmcModel& y, double p,
                                    double tol = 1e-12) {
    const std::size_t n = x.size();
    const double sigma = (1.0 + std::abs(p)) * detail::max_escape_rate(x, y) + 1.0;
    Matrix M(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double rx = x.rate(a, b);
            if (rx == 0.0) continue;
            M(a, b) = rx * std::pow(rx / y.rate(a, b), p);
        }
        M(a, a) = -x.escape_rates[a] - p * (x.escape_rates[a] - y.escape_rates[a]) + sigma;
    }
    return perron_root(M, tol).value - sigma;
}

/// F_d(p) = (1/d) log lambda_max(A_p) with A_p(a,b) = PX(a,b)^{1+p} PY(a,b)^{-p}.
/// Only defined for |p| < 1; the underlying waiting-time moments diverge at
/// |p| >= 1, so such p are rejected with domain_error.
inline double discrete_scgf_value(const Matrix& PX, const Matrix& PY, double delta, double p,
                                  double tol = 1e-12) {
    if (!(std::abs(p) < 1.0))
        throw domain_error("discrete scgf: diverges for |p| >= 1 (moment of order p is infinite)");
    if (!(delta > 0.0)) throw validation_error("discrete scgf: delta must be > 0");
    const std::size_t n = PX.rows;
    Matrix A(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double px = PX(a, b);
            if (px == 0.0) continue;
            const double py = PY(a, b);
            if (py == 0.0)
                throw absolute_continuity_error(
                    "discrete scgf: comparison kernel vanishes where the base kernel does not");
            A(a, b) = std::pow(px, 1.0 + p) * std::pow(py, -p);
        }
    }
    return std::log(perron_root(A, tol).value) / delta;
}

namespace detail {

inline ScgfCurve build_curve(ScgfKind kind, double delta, const std::vector<double>& grid,
                             const std::function<double(double)>& eval) {
    ScgfCurve c;
    c.kind = kind;
    c.delta = delta;
    c.p = grid;
    c.value.reserve(grid.size());
    for (double p : grid) c.value.push_back(eval(p));
    const double at0 = eval(0.0);
    if (std::abs(at0) > 1e-10)
        throw numeric_error("scgf: value at p=0 is " + std::to_string(at0) + ", expected 0");
    // one-sided slopes at p = +-(1-eps), eps = h = 1e-3
    const double eps = 1e-3, h = 1e-3;
    c.c_minus = (eval(-1.0 + eps + h) - eval(-1.0 + eps)) / h;
    c.c_plus = (eval(1.0 - eps) - eval(1.0 - eps - h)) / h;
    c.eval = eval;
    return c;
}

} // namespace detail

inline ScgfCurve continuous_scgf(const CtmcModel& x, const CtmcModel& y,
                                 const std::vector<double>& p_grid = default_p_grid()) {
    validate_model(x);
    validate_model(y);
    if (x.size() != y.size())
        throw validation_error("continuous_scgf: models live on different state spaces");
    detail::check_absolute_continuity(x, y);
    CtmcModel xc = x, yc = y;
    auto eval = [xc, yc](double p) { return continuous_scgf_value(xc, yc, p); };
    return detail::build_curve(ScgfKind::continuous, 0.0, p_grid, eval);
}

/// `mu_check` must be the stationary law of PX; this is verified rather than
/// trusted since downstream rescalings quietly depend on it.
inline ScgfCurve discrete_scgf(const Matrix& PX, const Matrix& PY, const StationaryDist& mu_check,
                               double delta, const std::vector<double>& p_grid = default_p_grid()) {
    if (PX.rows != PX.cols || PY.rows != PY.cols || PX.rows != PY.rows)
        throw validation_error("discrete_scgf: kernel shape mismatch");
    if (mu_check.size() != PX.rows)
        throw validation_error("discrete_scgf: stationary vector has wrong size");
    std::vector<double> muP = mu_check.mu * PX;
    for (std::size_t i = 0; i < muP.size(); ++i)
        if (std::abs(muP[i] - mu_check[i]) > 1e-8)
            throw validation_error("discrete_scgf: mu is not stationary for the base kernel");
    Matrix px = PX, py = PY;
    const double d = delta;
    auto eval = [px, py, d](double p) { return discrete_scgf_value(px, py, d, p); };
    return detail::build_curve(ScgfKind::discrete, delta, p_grid, eval);
}

/// Convexity check used by the Legendre transform: second differences on the
/// stored grid must be >= -1e-8.
inline void check_convexity(const ScgfCurve& c) {
    for (std::size_t i = 1; i + 1 < c.p.size(); ++i) {
        const double second = c.value[i - 1] - 2.0 * c.value[i] + c.value[i + 1];
        if (second < -1e-8)
            throw numeric_error("scgf curve is not convex at p=" + std::to_string(c.p[i]));
    }
}

/// Legendre transform I(q) = max_p (p q - F(p)) over the curve grid, on a
/// q-grid spanning the slope interval [c-, c+]. The interval collapses to a
/// point when the two models coincide.
inline RateFunction legendre_transform(const ScgfCurve& curve, std::size_t q_points = 101) {
    if (curve.p.size() < 3) throw validation_error("legendre_transform: curve grid too small");
    check_convexity(curve);
    RateFunction rf;
    rf.c_minus = curve.c_minus;
    rf.c_plus = curve.c_plus;
    const double span = curve.c_plus - curve.c_minus;
    if (span < -1e-9) throw numeric_error("legendre_transform: slope interval is inverted");
    std::vector<double> qs;
    if (span < 1e-9 || q_points < 2) {
        qs.push_back(0.5 * (curve.c_minus + curve.c_plus));
    } else {
        qs.reserve(q_points);
        for (std::size_t i = 0; i < q_points; ++i)
            qs.push_back(curve.c_minus + span * static_cast<double>(i) /
                                             static_cast<double>(q_points - 1));
    }
    rf.q = std::move(qs);
    rf.value.reserve(rf.q.size());
    for (double q : rf.q) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < curve.p.size(); ++i)
            best = std::max(best, curve.p[i] * q - curve.value[i]);
        rf.value.push_back(best);
    }
    return rf;
}

/// Per-step mean and asymptotic variance of the discretized log-likelihood
/// ratio: m = sum mu(a) PX(a,b) log(PX/PY)(a,b), and sigma2 the second
/// derivative at 0 of p -> log lambda_max(A_p), by central differences with
/// step 1e-4.
struct DiscreteMoments {
    double mean = 0.0;
    double variance = 0.0;
};

inline DiscreteMoments discrete_mean_and_variance(const Matrix& PX, const Matrix& PY,
                                                  const StationaryDist& mu, double delta) {
    DiscreteMoments out;
    const std::size_t n = PX.rows;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double px = PX(a, b);
            if (px == 0.0) continue;
            const double py = PY(a, b);
            if (py == 0.0)
                throw absolute_continuity_error(
                    "discrete_mean_and_variance: comparison kernel vanishes on the base support");
            out.mean += mu[a] * px * std::log(px / py);
        }
    }
    const double h = 1e-4;
    // eigenvalues to near machine precision so the second difference keeps
    // ~1e-6 absolute accuracy
    auto lam = [&](double p) {
        return delta * discrete_scgf_value(PX, PY, delta, p, 1e-14);
    };
    out.variance = (lam(h) - 2.0 * lam(0.0) + lam(-h)) / (h * h);
    if (out.variance < 0.0 && out.variance > -1e-10) out.variance = 0.0;
    return out;
}

} // namespace relent
