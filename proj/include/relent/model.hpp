#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "relent/errors.hpp"
#include "relent/linalg.hpp"

// Finite-state continuous-time Markov chains in escape-rate/jump-matrix form,
// and the exact (non-stochastic) quantities derived from them. Everything in
// this header is deterministic and pure.

namespace relent {

/// A chain on states {0..n-1} that waits an Exponential(escape_rates[x]) time
/// in state x and then jumps to y with probability jump(x,y). The jump matrix
/// has zero diagonal, so every jump changes the state.
struct CtmcModel {
    std::vector<std::string> states; // display labels, size n
    std::vector<double> escape_rates;
    Matrix jump; // n x n, row-stochastic, zero diagonal

    std::size_t size() const { return states.size(); }

    /// Rate of the transition x -> y, i.e. escape_rates[x] * jump(x,y).
    double rate(std::size_t x, std::size_t y) const { return escape_rates[x] * jump(x, y); }
};

struct GeneratorMatrix {
    Matrix L;
    std::size_t size() const { return L.rows; }
};

struct StationaryDist {
    std::vector<double> mu;
    std::size_t size() const { return mu.size(); }
    double operator[](std::size_t i) const { return mu[i]; }
};

namespace detail {

inline bool strongly_connected(const CtmcModel& m) {
    const std::size_t n = m.size();
    auto reach_all = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            for (std::size_t y = 0; y < n; ++y) {
                const double r = forward ? m.rate(x, y) : m.rate(y, x);
                if (r > 0.0 && !seen[y]) {
                    seen[y] = 1;
                    ++count;
                    stack.push_back(y);
                }
            }
        }
        return count == n;
    };
    return reach_all(true) && reach_all(false);
}

} // namespace detail

/// Checks every structural invariant of a model; throws validation_error
/// naming the first violated one.
inline void validate_model(const CtmcModel& m) {
    const std::size_t n = m.size();
    if (n < 2) throw validation_error("model: needs at least 2 states");
    if (m.escape_rates.size() != n)
        throw validation_error("model: escape_rates size does not match state count");
    if (m.jump.rows != n || m.jump.cols != n)
        throw validation_error("model: jump_matrix shape does not match state count");
    for (std::size_t x = 0; x < n; ++x)
        if (!(m.escape_rates[x] > 0.0) || !std::isfinite(m.escape_rates[x]))
            throw validation_error("model: escape rate of state '" + m.states[x] +
                                   "' must be strictly positive");
    for (std::size_t x = 0; x < n; ++x)
        if (m.jump(x, x) != 0.0)
            throw validation_error("model: jump_matrix diagonal must be zero (state '" +
                                   m.states[x] + "')");
    for (std::size_t x = 0; x < n; ++x) {
        double row = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            const double p = m.jump(x, y);
            if (p < 0.0 || !std::isfinite(p))
                throw validation_error("model: jump_matrix has a negative or non-finite entry in row '" +
                                       m.states[x] + "'");
            row += p;
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw validation_error("model: jump_matrix row '" + m.states[x] +
                                   "' sums to " + std::to_string(row) + ", expected 1");
    }
    if (!detail::strongly_connected(m))
        throw validation_error("model: transition graph is not irreducible");
}

/// L(x,y) = c(x) p(x,y) off-diagonal, L(x,x) = -c(x); rows sum to zero.
inline GeneratorMatrix build_generator(const CtmcModel& m) {
    validate_model(m);
    const std::size_t n = m.size();
    Matrix L(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y)
            if (y != x) L(x, y) = m.rate(x, y);
        L(x, x) = -m.escape_rates[x];
    }
    return GeneratorMatrix{std::move(L)};
}

/// Unique probability vector with mu L = 0, computed by dense LU on the
/// balance system with one equation replaced by sum(mu) = 1. Deterministic.
inline StationaryDist stationary_distribution(const GeneratorMatrix& gen) {
    const std::size_t n = gen.size();
    Matrix A = gen.L.transposed(); // rows are balance equations for each state
    for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = 1.0;
    std::vector<double> b(n, 0.0);
    b[n - 1] = 1.0;
    std::vector<double> mu = solve_linear(std::move(A), std::move(b));
    double resid = 0.0;
    std::vector<double> muL = mu * gen.L;
    for (double r : muL) resid = std::max(resid, std::abs(r));
    for (double p : mu)
        if (!(p > 0.0)) throw numeric_error("stationary_distribution: non-positive component");
    if (resid > 1e-10) throw numeric_error("stationary_distribution: residual above 1e-10");
    return StationaryDist{std::move(mu)};
}

inline StationaryDist stationary_distribution(const CtmcModel& m) {
    return stationary_distribution(build_generator(m));
}

/// Time reversal at stationarity: rate(x,y) of the reversed chain equals
/// c(y) p(y,x) mu(y) / mu(x), re-factored into escape rates and a jump
/// matrix. The reversed chain keeps the stationary law mu (checked to 1e-10).
inline CtmcModel reverse(const CtmcModel& m, const StationaryDist& mu) {
    validate_model(m);
    const std::size_t n = m.size();
    CtmcModel rev;
    rev.states = m.states;
    rev.escape_rates.assign(n, 0.0);
    rev.jump = Matrix(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        double total = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            const double r = m.rate(y, x) * mu[y] / mu[x];
            rev.jump(x, y) = r; // rates for now, normalized below
            total += r;
        }
        if (!(total > 0.0)) throw numeric_error("reverse: state with zero reversed escape rate");
        rev.escape_rates[x] = total;
        for (std::size_t y = 0; y < n; ++y) rev.jump(x, y) /= total;
    }
    // stationarity is preserved by construction; verify mu L~ = 0
    GeneratorMatrix grev = build_generator(rev);
    std::vector<double> muL = mu.mu * grev.L;
    for (double r : muL)
        if (std::abs(r) > 1e-10)
            throw numeric_error("reverse: reversed chain does not keep the stationary law");
    return rev;
}

inline CtmcModel reverse(const CtmcModel& m) { return reverse(m, stationary_distribution(m)); }

/// Relative entropy per unit time of the path law of `x` with respect to the
/// path law of `y` (both started stationary, same state space):
///
///   s = sum_{a,b} mu(a) cx(a) px(a,b) log[ cx(a) px(a,b) / (cy(a) py(a,b)) ]
///       - sum_a mu(a) (cx(a) - cy(a))
///
/// with mu the stationary law of `x` and the convention 0 log 0 = 0. Throws
/// absolute_continuity_error when some transition has positive x-rate but
/// zero y-rate (the relative entropy is then infinite).
inline double relative_entropy_rate(const CtmcModel& x, const CtmcModel& y) {
    validate_model(x);
    validate_model(y);
    if (x.size() != y.size())
        throw validation_error("relative_entropy_rate: models live on different state spaces");
    const StationaryDist mu = stationary_distribution(x);
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double rx = x.rate(a, b);
            if (rx == 0.0) continue;
            const double ry = y.rate(a, b);
            if (ry == 0.0)
                throw absolute_continuity_error(
                    "relative_entropy_rate: transition '" + x.states[a] + "'->'" + x.states[b] +
                    "' has positive rate in the base model but zero in the comparison model");
            s += mu[a] * rx * std::log(rx / ry);
        }
        s -= mu[a] * (x.escape_rates[a] - y.escape_rates[a]);
    }
    return s;
}

/// Mean entropy production per unit time: the relative entropy rate of the
/// chain with respect to its own time reversal. Nonnegative, and zero exactly
/// when the chain is in detailed balance.
inline double entropy_production_rate(const CtmcModel& m) {
    const StationaryDist mu = stationary_distribution(m);
    return relative_entropy_rate(m, reverse(m, mu));
}

/// Transition matrix exp(delta L) of the chain observed on the grid
/// {0, delta, 2 delta, ...}.
inline Matrix discretized_transition_matrix(const CtmcModel& m, double delta) {
    if (!(delta > 0.0)) throw validation_error("discretized_transition_matrix: delta must be > 0");
    GeneratorMatrix gen = build_generator(m);
    for (double& v : gen.L.a) v *= delta;
    Matrix P = expm(gen.L);
    // exp of a generator is stochastic; scrub rounding noise only
    for (std::size_t i = 0; i < P.rows; ++i) {
        for (std::size_t j = 0; j < P.cols; ++j) {
            if (P(i, j) < 0.0) {
                if (P(i, j) < -1e-12)
                    throw numeric_error("discretized_transition_matrix: negative entry beyond tolerance");
                P(i, j) = 0.0;
            }
        }
    }
    return P;
}

/// Decay rate of the chain: minus the largest real part among the non-zero
/// eigenvalues of the generator.
inline double spectral_gap(const GeneratorMatrix& gen) {
    std::vector<std::complex<double>> eig = eigenvalues(gen.L); // sorted by Re, descending
    if (eig.empty()) throw numeric_error("spectral_gap: empty generator");
    // the leading eigenvalue is the structural zero; skip exactly one
    double scale = std::max(1.0, inf_norm(gen.L));
    if (std::abs(eig.front().real()) > 1e-8 * scale || std::abs(eig.front().imag()) > 1e-8 * scale)
        throw numeric_error("spectral_gap: leading eigenvalue is not numerically zero");
    if (eig.size() < 2) throw numeric_error("spectral_gap: generator has a single state");
    return -eig[1].real();
}

/// log P(block) of a word under the stationary discretized chain:
/// log mu(b0) + sum log P(b_i, b_{i+1}). Throws absolute_continuity_error on
/// a zero-probability step.
inline double block_log_probability(const StationaryDist& mu, const Matrix& P,
                                    std::span<const int> block) {
    if (block.empty()) throw validation_error("block_log_probability: empty block");
    double lp = std::log(mu[static_cast<std::size_t>(block[0])]);
    for (std::size_t i = 0; i + 1 < block.size(); ++i) {
        const double p = P(static_cast<std::size_t>(block[i]), static_cast<std::size_t>(block[i + 1]));
        if (!(p > 0.0))
            throw absolute_continuity_error("block_log_probability: zero-probability transition in block");
        lp += std::log(p);
    }
    return lp;
}

} // namespace relent
