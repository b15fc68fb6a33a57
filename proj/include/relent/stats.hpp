#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "relent/errors.hpp"
#include "relent/linalg.hpp"

// Plain estimation statistics used by the experiment harness: running
// moments, Kolmogorov-Smirnov and chi-square goodness of fit, and small
// least-squares fits.

namespace relent {

struct SampleStats {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0; // sum of squared deviations (Welford)

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double stderror() const {
        return count > 0 ? stddev() / std::sqrt(static_cast<double>(count)) : 0.0;
    }
};

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw validation_error("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    }
    return d;
}

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1}
/// exp(-2 k^2 lambda^2), with the usual finite-sample effective lambda.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = d * (sn + 0.12 + 0.11 / sn);
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * lambda * lambda * k * k);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace detail {

// Regularized lower incomplete gamma P(a,x), series + continued fraction.
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw numeric_error("gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction for Q(a,x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

} // namespace detail

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
inline double chi_square_pvalue(double statistic, double dof) {
    return 1.0 - detail::gamma_p(dof / 2.0, statistic / 2.0);
}

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double pvalue = 1.0;
};

/// Goodness of fit of observed counts against expected counts; cells with
/// expected count below `min_expected` are pooled into their neighbor.
inline ChiSquareResult chi_square_gof(const std::vector<double>& observed,
                                      const std::vector<double>& expected,
                                      double min_expected = 5.0) {
    if (observed.size() != expected.size() || observed.empty())
        throw validation_error("chi_square_gof: size mismatch");
    double stat = 0.0;
    std::size_t cells = 0;
    double obs_pool = 0.0, exp_pool = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        obs_pool += observed[i];
        exp_pool += expected[i];
        if (exp_pool >= min_expected) {
            stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
            ++cells;
            obs_pool = exp_pool = 0.0;
        }
    }
    if (exp_pool > 0.0) {
        stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
        ++cells;
    }
    ChiSquareResult r;
    r.statistic = stat;
    r.dof = cells > 1 ? static_cast<double>(cells - 1) : 1.0;
    r.pvalue = chi_square_pvalue(r.statistic, r.dof);
    return r;
}

/// Maximum-likelihood rate of an exponential sample.
inline double exponential_mle_rate(const std::vector<double>& sample) {
    if (sample.empty()) throw validation_error("exponential_mle_rate: empty sample");
    double s = 0.0;
    for (double x : sample) s += x;
    if (!(s > 0.0)) throw numeric_error("exponential_mle_rate: non-positive sample mean");
    return static_cast<double>(sample.size()) / s;
}

/// Least-squares coefficients for y ~ sum_j beta_j * basis_j(x), solved by
/// normal equations (tiny designs only).
inline std::vector<double> least_squares_fit(
    const std::vector<double>& x, const std::vector<double>& y,
    const std::vector<std::function<double(double)>>& basis) {
    const std::size_t m = basis.size();
    if (x.size() != y.size() || x.size() < m)
        throw validation_error("least_squares_fit: underdetermined system");
    Matrix ata(m, m);
    std::vector<double> atb(m, 0.0);
    for (std::size_t r = 0; r < x.size(); ++r) {
        std::vector<double> row(m);
        for (std::size_t j = 0; j < m; ++j) row[j] = basis[j](x[r]);
        for (std::size_t i = 0; i < m; ++i) {
            atb[i] += row[i] * y[r];
            for (std::size_t j = 0; j < m; ++j) ata(i, j) += row[i] * row[j];
        }
    }
    return solve_linear(std::move(ata), std::move(atb));
}

} // namespace relent
