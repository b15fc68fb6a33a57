#pragma once

// Shared model fixtures for the test suites and the acceptance runner.

#include <string>
#include <vector>

#include "relent/model.hpp"
#include "relent/rng.hpp"

namespace relent::fixtures {

/// Two states, c = (1,2), deterministic swap jumps. Stationary law (2/3, 1/3).
inline CtmcModel two_state() {
    CtmcModel m;
    m.states = {"a", "b"};
    m.escape_rates = {1.0, 2.0};
    m.jump = Matrix(2, 2);
    m.jump(0, 1) = 1.0;
    m.jump(1, 0) = 1.0;
    return m;
}

/// The comparison chain: same jumps, escape rates swapped to (2,1).
inline CtmcModel two_state_tilde() {
    CtmcModel m = two_state();
    m.escape_rates = {2.0, 1.0};
    return m;
}

/// Symmetric two-state chain with common rate a.
inline CtmcModel two_state_sym(double a = 1.0) {
    CtmcModel m = two_state();
    m.escape_rates = {a, a};
    return m;
}

/// Three-state cycle, unit escape rates, probability q forward / 1-q back.
inline CtmcModel cycle3(double q) {
    CtmcModel m;
    m.states = {"s0", "s1", "s2"};
    m.escape_rates = {1.0, 1.0, 1.0};
    m.jump = Matrix(3, 3);
    for (std::size_t x = 0; x < 3; ++x) {
        m.jump(x, (x + 1) % 3) = q;
        m.jump(x, (x + 2) % 3) = 1.0 - q;
    }
    return m;
}

/// Random irreducible model with full off-diagonal support.
inline CtmcModel random_model(std::size_t n, CounterRng& rng) {
    CtmcModel m;
    m.escape_rates.resize(n);
    m.jump = Matrix(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        m.states.push_back("x" + std::to_string(x));
        m.escape_rates[x] = 0.2 + 3.0 * rng.uniform01();
        double row = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            m.jump(x, y) = 0.05 + rng.uniform01();
            row += m.jump(x, y);
        }
        for (std::size_t y = 0; y < n; ++y) m.jump(x, y) /= row;
    }
    return m;
}

/// Random chain in detailed balance: rates K(x,y)/mu(x) from a symmetric
/// positive conductance matrix K and a random positive law mu.
inline CtmcModel random_reversible(std::size_t n, CounterRng& rng) {
    std::vector<double> mu(n);
    double total = 0.0;
    for (double& v : mu) { v = 0.1 + rng.uniform01(); total += v; }
    for (double& v : mu) v /= total;
    Matrix K(n, n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y) K(x, y) = K(y, x) = 0.05 + rng.uniform01();
    CtmcModel m;
    m.escape_rates.resize(n);
    m.jump = Matrix(n, n);
    for (std::size_t x = 0; x < n; ++x) {
        m.states.push_back("r" + std::to_string(x));
        double c = 0.0;
        for (std::size_t y = 0; y < n; ++y)
            if (y != x) c += K(x, y) / mu[x];
        m.escape_rates[x] = c;
        for (std::size_t y = 0; y < n; ++y)
            if (y != x) m.jump(x, y) = K(x, y) / mu[x] / c;
    }
    return m;
}

} // namespace relent::fixtures
