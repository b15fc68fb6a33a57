#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <optional>

#include "fixtures.hpp"
#include "relent/matching.hpp"

using namespace relent;
namespace fx = relent::fixtures;

namespace {

DiscretePath path_of(std::vector<int> symbols, double delta = 0.1) {
    DiscretePath p;
    p.delta = delta;
    p.symbols = std::move(symbols);
    return p;
}

// Quadratic-scan oracle: first window start w >= w_min with
// target[w..w+m-1] == pattern, scanning a stored array only.
std::optional<std::uint64_t> naive_window(const std::vector<int>& pattern,
                                          const std::vector<int>& target, std::uint64_t w_min) {
    const std::size_t m = pattern.size();
    if (target.size() < m) return std::nullopt;
    for (std::size_t w = w_min; w + m <= target.size(); ++w) {
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i)
            if (target[w + i] != pattern[i]) { ok = false; break; }
        if (ok) return w;
    }
    return std::nullopt;
}

std::vector<int> int_to_path(unsigned code, std::size_t len, int alphabet) {
    std::vector<int> p(len);
    for (std::size_t i = 0; i < len; ++i) {
        p[i] = static_cast<int>(code % static_cast<unsigned>(alphabet));
        code /= static_cast<unsigned>(alphabet);
    }
    return p;
}

/// Unbounded stream repeating a fixed cycle of symbols.
class CycleStream {
  public:
    explicit CycleStream(std::vector<int> cycle) : cycle_(std::move(cycle)) {}
    int next() { return cycle_[i_++ % cycle_.size()]; }

  private:
    std::vector<int> cycle_;
    std::size_t i_ = 0;
};

} // namespace

// ============================================================================
// Convention examples
// ============================================================================

TEST(Waiting, DefinitionExample) {
    // base block (a, b) found at (Y_2, Y_3) => k = 1
    const std::vector<int> block{0, 1};
    DiscretePath target = path_of({9, 9, 0, 1, 0});
    MatchResult r = waiting_time(std::span<const int>(block), PathStream(target), 5);
    ASSERT_TRUE(r.found());
    EXPECT_EQ(r.value, 1u);
    EXPECT_EQ(r.scanned, 4u);
}

TEST(Waiting, ConstantSequencesMatchImmediately) {
    DiscretePath base = path_of({0, 0, 0, 0});
    DiscretePath target = path_of({0, 0, 0, 0, 0, 0});
    MatchResult r = waiting_time(base, target, 3, 100);
    ASSERT_TRUE(r.found());
    EXPECT_EQ(r.value, 1u);
}

TEST(Waiting, BasePathMustCoverBlock) {
    DiscretePath base = path_of({0, 1});
    DiscretePath target = path_of({0, 1, 0, 1});
    EXPECT_THROW(waiting_time(base, target, 2, 100), validation_error);
}

TEST(Hitting, SingleSymbolExample) {
    // pattern (a) with target symbols (., ., a): first admissible window is
    // grid index 2, reported k = 1
    const std::vector<int> pat{0};
    DiscretePath target = path_of({1, 1, 0});
    MatchResult r = hitting_time(std::span<const int>(pat), target, 100);
    ASSERT_TRUE(r.found());
    EXPECT_EQ(r.value, 1u);
}

TEST(Hitting, CensoredWhenAbsentWithinBudget) {
    const std::vector<int> pat{2};
    CycleStream target({0, 1, 0, 1});
    MatchResult r = hitting_time(std::span<const int>(pat), target, 1000);
    EXPECT_TRUE(r.censored);
    EXPECT_EQ(r.scanned, 1000u);
}

TEST(Return, ConstantPathReturnsAtOne) {
    DiscretePath p = path_of({0, 0, 0, 0, 0});
    MatchResult r = return_time(p, 3, 100);
    ASSERT_TRUE(r.found());
    EXPECT_EQ(r.value, 1u);
}

TEST(Return, PeriodicPathReturnsAtPeriod) {
    DiscretePath p = path_of({0, 1, 0, 1, 0, 1});
    MatchResult r = return_time(p, 2, 100);
    ASSERT_TRUE(r.found());
    EXPECT_EQ(r.value, 2u);
}

TEST(Return, StreamOverloadAgreesWithStored) {
    const std::vector<int> symbols{0, 1, 1, 0, 2, 0, 1, 1, 0, 1, 2, 0, 1, 1, 0};
    for (std::size_t n = 1; n <= 5; ++n) {
        DiscretePath p = path_of(symbols);
        MatchResult a = return_time(p, n, symbols.size());
        PathStream src(p);
        MatchResult b = return_time_stream(src, n, symbols.size());
        EXPECT_EQ(a.censored, b.censored);
        if (a.found()) { EXPECT_EQ(a.value, b.value); }
    }
}

TEST(Shadow, ZeroIffTargetStartsByMatching) {
    Trajectory gamma;
    gamma.initial_state = 0;
    gamma.times = {0.15};
    gamma.states = {1};
    gamma.horizon = 1.0;
    // delta = 0.1, n = 3: pattern = gamma at (0.1, 0.2, 0.3) = (0, 1, 1)
    const std::vector<int> pat = shadow_pattern(gamma, 0.1, 3);
    EXPECT_EQ(pat, (std::vector<int>{0, 1, 1}));

    DiscretePath starts = path_of({0, 1, 1, 2, 2});
    MatchResult r0 = shadow_hitting_time(gamma, starts, 0.1, 3, 100);
    ASSERT_TRUE(r0.found());
    EXPECT_EQ(r0.value, 0u);

    DiscretePath later = path_of({2, 0, 1, 1, 2});
    MatchResult r1 = shadow_hitting_time(gamma, later, 0.1, 3, 100);
    ASSERT_TRUE(r1.found());
    EXPECT_EQ(r1.value, 1u);
}

// ============================================================================
// Brute-force equivalence (exhaustive small cases + randomized long ones)
// ============================================================================

TEST(BruteForce, WaitingAndHittingExhaustiveBinary) {
    // every pattern of length 1..5 against every binary target of length 10
    for (std::size_t plen = 1; plen <= 5; ++plen) {
        const unsigned pcount = 1u << plen;
        for (unsigned pc = 0; pc < pcount; ++pc) {
            const std::vector<int> pattern = int_to_path(pc, plen, 2);
            for (unsigned tc = 0; tc < (1u << 10); ++tc) {
                const std::vector<int> target = int_to_path(tc, 10, 2);
                DiscretePath tp = path_of(target);
                MatchResult r = hitting_time(std::span<const int>(pattern), tp, 10);
                const auto want = naive_window(pattern, target, 2);
                if (want) {
                    ASSERT_TRUE(r.found());
                    ASSERT_EQ(r.value, *want - 1);
                } else {
                    ASSERT_TRUE(r.censored);
                }
            }
        }
    }
}

TEST(BruteForce, ReturnExhaustiveTernary) {
    for (std::size_t len = 2; len <= 9; ++len) {
        unsigned total = 1;
        for (std::size_t i = 0; i < len; ++i) total *= 3;
        for (unsigned code = 0; code < total; ++code) {
            const std::vector<int> symbols = int_to_path(code, len, 3);
            for (std::size_t n = 1; n <= std::min<std::size_t>(5, len); ++n) {
                DiscretePath p = path_of(symbols);
                MatchResult r = return_time(p, n, len);
                const std::vector<int> prefix(symbols.begin(), symbols.begin() + n);
                const auto want = naive_window(prefix, symbols, 1);
                if (want) {
                    ASSERT_TRUE(r.found());
                    ASSERT_EQ(r.value, *want);
                } else {
                    ASSERT_TRUE(r.censored);
                }
            }
        }
    }
}

TEST(BruteForce, RandomizedTernaryLengthTwenty) {
    CounterRng rng(1234, 0, 0);
    for (int rep = 0; rep < 20000; ++rep) {
        const std::size_t tlen = 6 + rng.next_u32() % 15; // up to 20
        const std::size_t n = 1 + rng.next_u32() % 5;
        std::vector<int> target(tlen), pattern(n);
        for (auto& s : target) s = static_cast<int>(rng.next_u32() % 3);
        for (auto& s : pattern) s = static_cast<int>(rng.next_u32() % 3);
        DiscretePath tp = path_of(target);

        MatchResult h = hitting_time(std::span<const int>(pattern), tp, tlen);
        const auto hw = naive_window(pattern, target, 2);
        ASSERT_EQ(h.found(), hw.has_value());
        if (hw) { ASSERT_EQ(h.value, *hw - 1); }

        MatchResult w = waiting_time(std::span<const int>(pattern), PathStream(tp), tlen);
        ASSERT_EQ(w.found(), hw.has_value());
        if (hw) { ASSERT_EQ(w.value, *hw - 1); }

        if (tlen >= n) {
            MatchResult r = return_time(tp, n, tlen);
            const std::vector<int> prefix(target.begin(), target.begin() + n);
            const auto rw = naive_window(prefix, target, 1);
            ASSERT_EQ(r.found(), rw.has_value());
            if (rw) { ASSERT_EQ(r.value, *rw); }
        }
    }
}

// ============================================================================
// Order and budget properties
// ============================================================================

TEST(Properties, LongerPatternsFoundNoEarlier) {
    const CtmcModel m = fx::cycle3(0.8);
    const Matrix P = discretized_transition_matrix(m, 0.5);
    const StationaryDist mu = stationary_distribution(m);
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        KernelStream bs(P, mu, CounterRng(91, rep, role::path_x));
        std::vector<int> base(9);
        for (auto& s : base) s = bs.next();
        DiscretePath bp = path_of(base, 0.5);
        std::uint64_t prev = 0;
        bool prev_censored = false;
        for (std::size_t n = 1; n <= 8; ++n) {
            KernelStream target(P, mu, CounterRng(92, rep, role::path_y));
            MatchResult r = waiting_time(bp, target, n, 20000);
            if (prev_censored) {
                ASSERT_TRUE(r.censored);
                continue;
            }
            if (r.censored) {
                prev_censored = true;
                continue;
            }
            ASSERT_GE(r.value, prev);
            prev = r.value;
        }
    }
}

TEST(Properties, CensoringNeverUnderstates) {
    const CtmcModel m = fx::two_state();
    const Matrix P = discretized_transition_matrix(m, 0.05);
    const StationaryDist mu = stationary_distribution(m);
    const std::size_t n = 8;
    int censored_then_found = 0;
    for (std::uint64_t rep = 0; rep < 400; ++rep) {
        KernelStream bs(P, mu, CounterRng(93, rep, role::path_x));
        std::vector<int> base(n + 1);
        for (auto& s : base) s = bs.next();
        const std::span<const int> block(base.data() + 1, n);
        const std::uint64_t small_budget = 64;
        KernelStream t1(P, mu, CounterRng(94, rep, role::path_y));
        MatchResult a = waiting_time(block, t1, small_budget);
        if (!a.censored) continue;
        EXPECT_EQ(a.scanned, small_budget);
        KernelStream t2(P, mu, CounterRng(94, rep, role::path_y)); // same stream, bigger budget
        MatchResult b = waiting_time(block, t2, 100000);
        if (b.found()) {
            // the match window must end beyond the exhausted budget
            EXPECT_GT(b.value + 1 + n, small_budget);
            ++censored_then_found;
        }
    }
    EXPECT_GT(censored_then_found, 10);
}

TEST(Properties, ThroughputAboveTenMegasymbols) {
    const CtmcModel m = fx::two_state();
    const Matrix P = discretized_transition_matrix(m, 0.1);
    const StationaryDist mu = stationary_distribution(m);
    // a pattern the stationary stream essentially never produces: long
    // alternation is exponentially unlikely at small delta
    std::vector<int> pattern;
    for (int i = 0; i < 12; ++i) pattern.push_back(i % 2);
    KernelStream target(P, mu, CounterRng(95, 0, role::path_y));
    const std::uint64_t budget = 20000000;
    const auto start = std::chrono::steady_clock::now();
    MatchResult r = hitting_time(std::span<const int>(pattern), target, budget);
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    const double rate = static_cast<double>(r.scanned) / seconds;
    EXPECT_GT(rate, 1e7);
}

// ============================================================================
// Sandwich diagnostic
// ============================================================================

TEST(Sandwich, SyntheticBandMembership) {
    // values with W * P in [1/n, log n] sit inside the band for k1 = k2 = 10
    std::vector<std::vector<SandwichSample>> samples(2);
    const std::vector<std::size_t> ns{10, 100};
    for (std::size_t i = 0; i < 2; ++i) {
        const double n = static_cast<double>(ns[i]);
        samples[i].push_back({1, std::log(1.0 / n), false});          // W*P = 1/n
        samples[i].push_back({1, std::log(std::log(n)), false});      // W*P = log n
        samples[i].push_back({1, 0.0, false});                        // W*P = 1
    }
    SandwichReport rep = sandwich_diagnostic(samples, ns, {0.1, 0.1}, false);
    for (const SandwichRow& row : rep.rows) {
        EXPECT_EQ(row.violations, 0u);
        EXPECT_EQ(row.total, 3u);
    }
}

TEST(Sandwich, ViolationsCountedAndCensoredExcluded) {
    std::vector<std::vector<SandwichSample>> samples(1);
    samples[0].push_back({1, 100.0, false});  // way above the band
    samples[0].push_back({1, -500.0, false}); // way below
    samples[0].push_back({1, 0.0, false});    // inside
    samples[0].push_back({1, 0.0, true});     // censored, ignored
    SandwichReport rep = sandwich_diagnostic(samples, {50}, {0.1}, false);
    EXPECT_EQ(rep.rows[0].total, 3u);
    EXPECT_EQ(rep.rows[0].censored, 1u);
    EXPECT_EQ(rep.rows[0].violations, 2u);
    EXPECT_NEAR(rep.rows[0].violation_fraction, 2.0 / 3.0, 1e-12);
}

TEST(Sandwich, ScheduledBandsScaleByDelta) {
    std::vector<std::vector<SandwichSample>> samples(1);
    samples[0].push_back({1, 0.0, false});
    SandwichReport fixed = sandwich_diagnostic(samples, {100}, {0.25}, false);
    SandwichReport sched = sandwich_diagnostic(samples, {100}, {0.25}, true);
    EXPECT_NEAR(sched.rows[0].lower, fixed.rows[0].lower / 0.25, 1e-12);
    EXPECT_NEAR(sched.rows[0].upper, std::log(10.0 * std::log(100.0) / 0.25), 1e-12);
}
