#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <concepts>
#include <span>
#include <vector>

#include "relent/errors.hpp"
#include "relent/trajectory.hpp"

// Streaming occurrence search on discretized symbol sequences. One matcher
// core (a prefix-function automaton, O(1) amortized work and memory per
// symbol) serves every variant; the variants differ only in how the pattern
// is built, where the first admissible window starts, and how the window
// position is reported.
//
// Index conventions, with t_j = target symbol at grid time j*delta:
//
//   variant   pattern                      window               reported   smallest
//   waiting   base path at grids 1..n      (t_{k+1},..,t_{k+n})    k          1
//   hitting   given block of n+1 symbols   (t_{k+1},..,t_{k+n+1})  k          1
//   return    own prefix at grids 0..n-1   (t_k,...,t_{k+n-1})     k          1
//   shadow    gamma at times delta..n*delta (t_k,...,t_{k+n-1})    k          0
//
// These offsets look gratuitous but the downstream limit constants are only
// correct with each variant's own convention, so they are fixed here once.

namespace relent {

/// Anything that yields one symbol per call; pathsim's stream types and
/// PathStream all qualify.
template <class S>
concept SymbolSource = requires(S s) {
    { s.next() } -> std::convertible_to<int>;
};

/// Search outcome. `censored` means the symbol budget ran out first; that is
/// data, not an error, and callers decide the policy. When censored,
/// `scanned` equals the (effective) budget.
struct MatchResult {
    bool censored = false;
    std::uint64_t value = 0;   // the reported k
    std::uint64_t scanned = 0; // target symbols consumed, including skipped lead-in

    bool found() const { return !censored; }
};

namespace detail {

inline std::vector<std::uint32_t> failure_table(std::span<const int> pattern) {
    std::vector<std::uint32_t> f(pattern.size() + 1, 0);
    for (std::size_t i = 1, j = 0; i < pattern.size(); ++i) {
        while (j > 0 && pattern[i] != pattern[j]) j = f[j];
        if (pattern[i] == pattern[j]) ++j;
        f[i + 1] = static_cast<std::uint32_t>(j);
    }
    return f;
}

/// Feeds symbols from `src` through the automaton until the pattern occurs
/// as target[w .. w+m-1] with w >= w_min, or `budget` symbols have been
/// consumed. Returns (found, w, scanned).
template <SymbolSource Source>
MatchResult scan_stream(std::span<const int> pattern, Source&& src, std::uint64_t w_min,
                        std::uint64_t budget) {
    const std::size_t m = pattern.size();
    if (m == 0) throw validation_error("matcher: empty pattern");
    const std::vector<std::uint32_t> fail = failure_table(pattern);
    const int* pat = pattern.data();
    std::uint64_t pos = 0;
    // skip (but count) the lead-in the convention excludes from every window
    for (; pos < std::min<std::uint64_t>(w_min, budget); ++pos) (void)src.next();
    std::size_t j = 0;
    for (; pos < budget; ++pos) {
        const int s = src.next();
        while (j > 0 && s != pat[j]) j = fail[j];
        if (s == pat[j]) ++j;
        if (j == m) return MatchResult{false, pos + 1 - m, pos + 1};
    }
    return MatchResult{true, 0, budget};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Waiting time: first k >= 1 with (X_1..X_n) = (Y_{k+1}..Y_{k+n}).
// ---------------------------------------------------------------------------

template <SymbolSource Source>
MatchResult waiting_time(std::span<const int> base_block, Source&& target, std::uint64_t budget) {
    MatchResult r = detail::scan_stream(base_block, target, 2, budget);
    if (r.found()) r.value -= 1; // window starts at grid k+1
    return r;
}

/// `base` must hold at least n+1 symbols; the pattern is its grid range 1..n.
template <SymbolSource Source>
MatchResult waiting_time(const DiscretePath& base, Source&& target, std::size_t n,
                         std::uint64_t budget) {
    if (base.symbols.size() < n + 1)
        throw validation_error("waiting_time: base path shorter than n+1 symbols");
    return waiting_time(std::span<const int>(base.symbols.data() + 1, n), target, budget);
}

inline MatchResult waiting_time(const DiscretePath& base, const DiscretePath& target,
                                std::size_t n, std::uint64_t budget) {
    PathStream src(target);
    const std::uint64_t eff = std::min<std::uint64_t>(budget, target.symbols.size());
    return waiting_time(base, src, n, eff);
}

// ---------------------------------------------------------------------------
// Hitting time: first k >= 1 with (t_{k+1}..t_{k+m}) equal to the given
// m-symbol block (conventionally m = n+1).
// ---------------------------------------------------------------------------

template <SymbolSource Source>
MatchResult hitting_time(std::span<const int> pattern, Source&& target, std::uint64_t budget) {
    MatchResult r = detail::scan_stream(pattern, target, 2, budget);
    if (r.found()) r.value -= 1;
    return r;
}

inline MatchResult hitting_time(std::span<const int> pattern, const DiscretePath& target,
                                std::uint64_t budget) {
    PathStream src(target);
    const std::uint64_t eff = std::min<std::uint64_t>(budget, target.symbols.size());
    return hitting_time(pattern, src, eff);
}

// ---------------------------------------------------------------------------
// Return time: first k >= 1 with (t_0..t_{n-1}) = (t_k..t_{k+n-1}) on one
// path. The streaming overload captures the prefix itself and keeps
// scanning the same source.
// ---------------------------------------------------------------------------

inline MatchResult return_time(const DiscretePath& path, std::size_t n, std::uint64_t budget) {
    if (path.symbols.size() < n) throw validation_error("return_time: path shorter than n symbols");
    PathStream src(path);
    const std::uint64_t eff = std::min<std::uint64_t>(budget, path.symbols.size());
    return detail::scan_stream(std::span<const int>(path.symbols.data(), n), src, 1, eff);
}

template <SymbolSource Source>
MatchResult return_time_stream(Source&& src, std::size_t n, std::uint64_t budget) {
    if (n == 0) throw validation_error("return_time: empty prefix");
    if (budget < n + 1) {
        for (std::uint64_t i = 0; i < std::min<std::uint64_t>(budget, n); ++i) (void)src.next();
        return MatchResult{true, 0, budget};
    }
    std::vector<int> prefix(n);
    for (std::size_t i = 0; i < n; ++i) prefix[i] = src.next();
    const std::vector<std::uint32_t> fail = detail::failure_table(prefix);
    std::size_t j = 0;
    std::uint64_t pos = 1;
    // positions 1..n-1 replay the captured prefix, then the source continues
    for (; pos < budget; ++pos) {
        const int s = pos < n ? prefix[pos] : src.next();
        while (j > 0 && s != prefix[j]) j = fail[j];
        if (s == prefix[j]) ++j;
        if (j == n) return MatchResult{false, pos + 1 - n, pos + 1};
    }
    return MatchResult{true, 0, budget};
}

// ---------------------------------------------------------------------------
// Shadowing: first k >= 0 at which the target's discretization reproduces
// the discretization of a given trajectory gamma at times delta..n*delta.
// ---------------------------------------------------------------------------

inline std::vector<int> shadow_pattern(const Trajectory& gamma, double delta, std::size_t n) {
    DiscretePath g = discretize(gamma, delta, n + 1);
    return std::vector<int>(g.symbols.begin() + 1, g.symbols.end());
}

template <SymbolSource Source>
MatchResult shadow_hitting_time(const Trajectory& gamma, Source&& target, double delta,
                                std::size_t n, std::uint64_t budget) {
    const std::vector<int> pat = shadow_pattern(gamma, delta, n);
    return detail::scan_stream(std::span<const int>(pat), target, 0, budget);
}

inline MatchResult shadow_hitting_time(const Trajectory& gamma, const DiscretePath& target,
                                       double delta, std::size_t n, std::uint64_t budget) {
    PathStream src(target);
    const std::uint64_t eff = std::min<std::uint64_t>(budget, target.symbols.size());
    return shadow_hitting_time(gamma, src, delta, n, eff);
}

// ---------------------------------------------------------------------------
// Sandwich diagnostic: empirical check that log(W * block probability) sits
// in the band [-k1 log n, log(k2 log n)] (fixed delta) or in the
// schedule-scaled band with both ends divided by delta_n.
// ---------------------------------------------------------------------------

struct SandwichSample {
    std::uint64_t w = 0;         // waiting/return index
    double log_block_prob = 0.0; // log probability of the matched block
    bool censored = false;
};

struct SandwichRow {
    std::size_t n = 0;
    double delta = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t total = 0;
    std::size_t censored = 0;
    std::size_t violations = 0;
    double violation_fraction = 0.0;
};

struct SandwichReport {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    bool scheduled = false;
    std::vector<SandwichRow> rows;
};

inline SandwichReport sandwich_diagnostic(const std::vector<std::vector<SandwichSample>>& samples,
                                          const std::vector<std::size_t>& n_grid,
                                          const std::vector<double>& deltas, bool scheduled,
                                          double kappa1 = 10.0, double kappa2 = 10.0) {
    if (samples.size() != n_grid.size() || deltas.size() != n_grid.size())
        throw validation_error("sandwich_diagnostic: grid sizes disagree");
    SandwichReport rep;
    rep.kappa1 = kappa1;
    rep.kappa2 = kappa2;
    rep.scheduled = scheduled;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const std::size_t n = n_grid[i];
        if (n < 2) throw validation_error("sandwich_diagnostic: needs n >= 2");
        SandwichRow row;
        row.n = n;
        row.delta = deltas[i];
        const double scale = scheduled ? deltas[i] : 1.0;
        row.lower = -kappa1 * std::log(static_cast<double>(n)) / scale;
        row.upper = std::log(kappa2 * std::log(static_cast<double>(n)) / scale);
        for (const SandwichSample& s : samples[i]) {
            if (s.censored) { ++row.censored; continue; }
            ++row.total;
            const double v = std::log(static_cast<double>(s.w)) + s.log_block_prob;
            if (v < row.lower || v > row.upper) ++row.violations;
        }
        row.violation_fraction =
            row.total == 0 ? 0.0 : static_cast<double>(row.violations) / static_cast<double>(row.total);
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace relent
