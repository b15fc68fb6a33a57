#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relent/errors.hpp"
#include "relent/model.hpp"
#include "relent/rng.hpp"

// Exact-in-distribution simulation of chain trajectories and the pathwise
// functionals read off them. Trajectories are stored by their jumps, so
// memory is proportional to the number of jumps and any number of sampling
// grids can be laid over the same path.

namespace relent {

/// Piecewise-constant cadlag path on [0, horizon]: the state is
/// `initial_state` before the first jump and `states[k]` from `times[k]` on.
struct Trajectory {
    int initial_state = 0;
    std::vector<double> times;  // strictly increasing, in (0, horizon]
    std::vector<int> states;    // state entered at each jump, same length
    double horizon = 0.0;

    std::size_t jump_count() const { return times.size(); }

    /// State at time t (right-continuous: a jump at exactly t has happened).
    int state_at(double t) const {
        std::size_t lo = 0, hi = times.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (times[mid] <= t) lo = mid + 1; else hi = mid;
        }
        return lo == 0 ? initial_state : states[lo - 1];
    }
};

/// The path sampled on the grid {0, delta, 2 delta, ...}.
struct DiscretePath {
    double delta = 0.0;
    std::vector<int> symbols; // symbols[i] = state at time i*delta
};

inline int sample_initial_state(const CtmcModel& m, CounterRng& rng, const StationaryDist& mu) {
    (void)m;
    return static_cast<int>(rng.pick(mu.mu));
}

/// Simulates the chain on [0, horizon]. `initial` < 0 draws the initial
/// state from the stationary law (both limit theorems assume stationary
/// starts); otherwise it is the fixed starting state.
inline Trajectory simulate(const CtmcModel& m, double horizon, CounterRng rng, int initial = -1) {
    if (!(horizon > 0.0)) throw validation_error("simulate: horizon must be > 0");
    validate_model(m);
    Trajectory traj;
    traj.horizon = horizon;
    StationaryDist mu;
    if (initial < 0) {
        mu = stationary_distribution(m);
        traj.initial_state = sample_initial_state(m, rng, mu);
    } else {
        if (static_cast<std::size_t>(initial) >= m.size())
            throw validation_error("simulate: initial state out of range");
        traj.initial_state = initial;
    }
    int x = traj.initial_state;
    double t = 0.0;
    const std::size_t n = m.size();
    while (true) {
        t += rng.exponential(m.escape_rates[static_cast<std::size_t>(x)]);
        if (t > horizon) break;
        const std::size_t y = rng.pick(&m.jump.a[static_cast<std::size_t>(x) * n], n);
        traj.times.push_back(t);
        traj.states.push_back(static_cast<int>(y));
        x = static_cast<int>(y);
    }
    return traj;
}

/// First `count` grid samples of the path: symbols[i] = state at i*delta,
/// i = 0..count-1. Errors out instead of truncating when the horizon is too
/// short; callers are expected to extend the simulation.
inline DiscretePath discretize(const Trajectory& traj, double delta, std::size_t count) {
    if (!(delta > 0.0)) throw validation_error("discretize: delta must be > 0");
    if (count == 0) throw validation_error("discretize: empty sample count");
    if (static_cast<double>(count - 1) * delta > traj.horizon)
        throw validation_error("discretize: horizon " + std::to_string(traj.horizon) +
                               " too short for " + std::to_string(count) + " samples at delta " +
                               std::to_string(delta));
    DiscretePath path;
    path.delta = delta;
    path.symbols.reserve(count);
    int x = traj.initial_state;
    std::size_t k = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) * delta;
        while (k < traj.times.size() && traj.times[k] <= t) x = traj.states[k++];
        path.symbols.push_back(x);
    }
    return path;
}

/// Full-horizon discretization: floor(horizon/delta) + 1 symbols.
inline DiscretePath discretize(const Trajectory& traj, double delta) {
    return discretize(traj, delta, static_cast<std::size_t>(std::floor(traj.horizon / delta)) + 1);
}

// ---------------------------------------------------------------------------
// Lazy symbol sources. Both produce the law of the delta-discretized chain
// started from its stationary law; matching consumes them one symbol at a
// time so waiting-time targets never need to be materialized.
// ---------------------------------------------------------------------------

/// Emits the delta-discretization of a trajectory simulated on the fly.
class TrajectoryStream {
  public:
    TrajectoryStream(const CtmcModel& m, double delta, CounterRng rng)
        : model_(&m), delta_(delta), rng_(std::move(rng)) {
        const StationaryDist mu = stationary_distribution(m);
        state_ = static_cast<int>(rng_.pick(mu.mu));
        next_jump_ = rng_.exponential(m.escape_rates[static_cast<std::size_t>(state_)]);
        t_ = 0.0;
        first_ = true;
    }

    int next() {
        if (first_) { first_ = false; return state_; }
        t_ += delta_;
        const std::size_t n = model_->size();
        while (next_jump_ <= t_) {
            state_ = static_cast<int>(
                rng_.pick(&model_->jump.a[static_cast<std::size_t>(state_) * n], n));
            next_jump_ += rng_.exponential(model_->escape_rates[static_cast<std::size_t>(state_)]);
        }
        return state_;
    }

  private:
    const CtmcModel* model_;
    double delta_;
    CounterRng rng_;
    int state_ = 0;
    double t_ = 0.0;
    double next_jump_ = 0.0;
    bool first_ = true;
};

/// Emits the same law by stepping the discretized kernel exp(delta L)
/// directly; one categorical draw per symbol, the fast path for long scans.
class KernelStream {
  public:
    KernelStream(const Matrix& P, const StationaryDist& mu, CounterRng rng)
        : P_(&P), n_(P.rows), rng_(std::move(rng)) {
        state_ = static_cast<int>(rng_.pick(mu.mu));
        first_ = true;
    }

    int next() {
        if (first_) { first_ = false; return state_; }
        state_ = static_cast<int>(rng_.pick(&P_->a[static_cast<std::size_t>(state_) * n_], n_));
        return state_;
    }

  private:
    const Matrix* P_;
    std::size_t n_;
    CounterRng rng_;
    int state_ = 0;
    bool first_ = true;
};

/// Replays a stored symbol sequence; next() beyond the end throws, which the
/// matcher surfaces as an exhausted (finite) target.
class PathStream {
  public:
    explicit PathStream(const DiscretePath& p) : path_(&p) {}
    bool exhausted() const { return i_ >= path_->symbols.size(); }
    int next() {
        if (exhausted()) throw validation_error("PathStream: ran past the stored path");
        return path_->symbols[i_++];
    }

  private:
    const DiscretePath* path_;
    std::size_t i_ = 0;
};

// ---------------------------------------------------------------------------
// Pathwise functionals
// ---------------------------------------------------------------------------

/// Precomputed tables for the log-likelihood ratio between two chains along
/// a path: log mu/mu~ at the start, log of the jump-rate ratio per observed
/// jump, and the occupation integral of the escape-rate difference.
class GirsanovEvaluator {
  public:
    GirsanovEvaluator(const CtmcModel& x, const CtmcModel& y)
        : nx_(x.size()), log_jump_ratio_(x.size(), x.size()), rate_diff_(x.size()) {
        validate_model(x);
        validate_model(y);
        if (x.size() != y.size())
            throw validation_error("girsanov: models live on different state spaces");
        const StationaryDist mux = stationary_distribution(x);
        const StationaryDist muy = stationary_distribution(y);
        log_mu_ratio_.resize(nx_);
        for (std::size_t a = 0; a < nx_; ++a) {
            log_mu_ratio_[a] = std::log(mux[a]) - std::log(muy[a]);
            rate_diff_[a] = x.escape_rates[a] - y.escape_rates[a];
            for (std::size_t b = 0; b < nx_; ++b) {
                if (b == a) continue;
                const double rx = x.rate(a, b);
                const double ry = y.rate(a, b);
                if (rx > 0.0 && ry > 0.0)
                    log_jump_ratio_(a, b) = std::log(rx / ry);
                else
                    log_jump_ratio_(a, b) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }

    /// Jump-term plus occupation-term contribution over the window (t0, t1].
    /// The initial log mu/mu~ term is not included.
    double increment(const Trajectory& traj, double t0, double t1) const {
        if (t0 > t1 || t1 > traj.horizon + 1e-12)
            throw validation_error("girsanov: window outside the trajectory horizon");
        double total = 0.0;
        int x = traj.state_at(t0);
        double prev = t0;
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const double tk = traj.times[k];
            if (tk <= t0) continue;
            if (tk > t1) break;
            const int y = traj.states[k];
            total -= (tk - prev) * rate_diff_[static_cast<std::size_t>(x)];
            const double lj = log_jump_ratio_(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            if (std::isnan(lj))
                throw absolute_continuity_error(
                    "girsanov: observed jump has zero intensity under one of the models");
            total += lj;
            x = y;
            prev = tk;
        }
        total -= (t1 - prev) * rate_diff_[static_cast<std::size_t>(x)];
        return total;
    }

    /// Full log-likelihood ratio log dP/dP~ of the window [0, t], including
    /// the stationary initial term.
    double log_ratio(const Trajectory& traj, double t) const {
        return log_mu_ratio_[static_cast<std::size_t>(traj.initial_state)] +
               increment(traj, 0.0, t);
    }

  private:
    std::size_t nx_;
    std::vector<double> log_mu_ratio_;
    Matrix log_jump_ratio_;
    std::vector<double> rate_diff_;
};

inline double girsanov_log_ratio(const Trajectory& traj, const CtmcModel& x, const CtmcModel& y,
                                 double t) {
    return GirsanovEvaluator(x, y).log_ratio(traj, t);
}

/// Entropy production accumulated over [0, t]: the log-likelihood ratio of
/// the time-reversed path measure against the forward one, so the value is
/// minus girsanov_log_ratio against the reversed chain and its long-run
/// average tends to minus the entropy production rate.
inline double entropy_production_sample(const Trajectory& traj, const CtmcModel& m, double t) {
    const StationaryDist mu = stationary_distribution(m);
    return -girsanov_log_ratio(traj, m, reverse(m, mu), t);
}

/// Matrix of jump counts N^{xy} on [0, t] plus their total.
struct JumpCounts {
    Matrix counts;
    std::uint64_t total = 0;
};

inline JumpCounts jump_pair_counts(const Trajectory& traj, double t, std::size_t n_states) {
    if (t > traj.horizon + 1e-12)
        throw validation_error("jump_pair_counts: t beyond the trajectory horizon");
    JumpCounts jc;
    jc.counts = Matrix(n_states, n_states);
    int x = traj.initial_state;
    for (std::size_t k = 0; k < traj.times.size() && traj.times[k] <= t; ++k) {
        const int y = traj.states[k];
        jc.counts(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) += 1.0;
        ++jc.total;
        x = y;
    }
    return jc;
}

} // namespace relent
