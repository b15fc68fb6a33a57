#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "relent/model.hpp"

using namespace relent;
namespace fx = relent::fixtures;

// ============================================================================
// Validation and generator construction
// ============================================================================

TEST(Validation, AcceptsFixtures) {
    EXPECT_NO_THROW(validate_model(fx::two_state()));
    EXPECT_NO_THROW(validate_model(fx::cycle3(0.9)));
}

TEST(Validation, NamesFirstViolatedInvariant) {
    CtmcModel m = fx::two_state();
    m.escape_rates[1] = 0.0;
    try {
        validate_model(m);
        FAIL() << "expected validation_error";
    } catch (const validation_error& e) {
        EXPECT_NE(std::string(e.what()).find("strictly positive"), std::string::npos);
    }

    m = fx::two_state();
    m.jump(0, 0) = 0.3;
    m.jump(0, 1) = 0.7;
    try {
        validate_model(m);
        FAIL() << "expected validation_error";
    } catch (const validation_error& e) {
        EXPECT_NE(std::string(e.what()).find("diagonal"), std::string::npos);
    }

    m = fx::two_state();
    m.jump(1, 0) = 0.9;
    try {
        validate_model(m);
        FAIL() << "expected validation_error";
    } catch (const validation_error& e) {
        EXPECT_NE(std::string(e.what()).find("sums to"), std::string::npos);
    }
}

TEST(Validation, RejectsReducibleChain) {
    // two disconnected swap pairs
    CtmcModel m;
    m.states = {"a", "b", "c", "d"};
    m.escape_rates = {1.0, 1.0, 1.0, 1.0};
    m.jump = Matrix(4, 4);
    m.jump(0, 1) = 1.0;
    m.jump(1, 0) = 1.0;
    m.jump(2, 3) = 1.0;
    m.jump(3, 2) = 1.0;
    EXPECT_THROW(validate_model(m), validation_error);
}

TEST(Generator, TwoStateEntries) {
    GeneratorMatrix g = build_generator(fx::two_state());
    EXPECT_DOUBLE_EQ(g.L(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(g.L(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(g.L(1, 0), 2.0);
    EXPECT_DOUBLE_EQ(g.L(1, 1), -2.0);
}

TEST(Generator, CycleEntriesAndZeroRowSums) {
    GeneratorMatrix g = build_generator(fx::cycle3(0.9));
    EXPECT_DOUBLE_EQ(g.L(0, 1), 0.9);
    EXPECT_DOUBLE_EQ(g.L(0, 2), 0.1);
    EXPECT_DOUBLE_EQ(g.L(0, 0), -1.0);
    CounterRng rng(1, 0, 0);
    for (int rep = 0; rep < 5; ++rep) {
        CtmcModel m = fx::random_model(2 + rep, rng);
        GeneratorMatrix gr = build_generator(m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.size(); ++j) s += gr.L(i, j);
            EXPECT_NEAR(s, 0.0, 1e-12);
        }
    }
}

// ============================================================================
// Stationary law
// ============================================================================

TEST(Stationary, TwoStateClosedForm) {
    StationaryDist mu = stationary_distribution(fx::two_state());
    EXPECT_NEAR(mu[0], 2.0 / 3.0, 1e-13);
    EXPECT_NEAR(mu[1], 1.0 / 3.0, 1e-13);
}

TEST(Stationary, CycleUniformAnyBias) {
    for (double q : {0.5, 0.7, 0.9}) {
        StationaryDist mu = stationary_distribution(fx::cycle3(q));
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(mu[i], 1.0 / 3.0, 1e-13);
    }
}

TEST(Stationary, SymmetricTwoStateIsHalfHalf) {
    StationaryDist mu = stationary_distribution(fx::two_state_sym(3.7));
    EXPECT_NEAR(mu[0], 0.5, 1e-13);
    EXPECT_NEAR(mu[1], 0.5, 1e-13);
}

TEST(Stationary, DeterministicAndBalanced) {
    CounterRng rng(2, 0, 0);
    for (int rep = 0; rep < 10; ++rep) {
        CtmcModel m = fx::random_model(2 + rep % 6, rng);
        GeneratorMatrix g = build_generator(m);
        StationaryDist mu1 = stationary_distribution(g);
        StationaryDist mu2 = stationary_distribution(g);
        double sum = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            EXPECT_EQ(mu1[i], mu2[i]); // bitwise deterministic
            EXPECT_GT(mu1[i], 0.0);
            sum += mu1[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        std::vector<double> muL = mu1.mu * g.L;
        for (double r : muL) EXPECT_NEAR(r, 0.0, 1e-10);
    }
}

// ============================================================================
// Time reversal
// ============================================================================

TEST(Reverse, ReversibleTwoStateIsFixedPoint) {
    CtmcModel m = fx::two_state();
    CtmcModel r = reverse(m);
    for (std::size_t x = 0; x < 2; ++x) {
        EXPECT_NEAR(r.escape_rates[x], m.escape_rates[x], 1e-12);
        for (std::size_t y = 0; y < 2; ++y) EXPECT_NEAR(r.jump(x, y), m.jump(x, y), 1e-12);
    }
}

TEST(Reverse, BiasedCycleSwapsDirection) {
    CtmcModel r = reverse(fx::cycle3(0.9));
    for (std::size_t x = 0; x < 3; ++x) {
        EXPECT_NEAR(r.escape_rates[x], 1.0, 1e-12);
        EXPECT_NEAR(r.jump(x, (x + 1) % 3), 0.1, 1e-12);
        EXPECT_NEAR(r.jump(x, (x + 2) % 3), 0.9, 1e-12);
    }
}

TEST(Reverse, InvolutionAndLawPreserved) {
    CounterRng rng(3, 0, 0);
    for (int rep = 0; rep < 8; ++rep) {
        CtmcModel m = fx::random_model(2 + rep % 5, rng);
        StationaryDist mu = stationary_distribution(m);
        CtmcModel r = reverse(m, mu);
        StationaryDist mur = stationary_distribution(r);
        for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(mur[i], mu[i], 1e-11);
        CtmcModel rr = reverse(r, mur);
        for (std::size_t x = 0; x < m.size(); ++x) {
            EXPECT_NEAR(rr.escape_rates[x], m.escape_rates[x], 1e-11);
            for (std::size_t y = 0; y < m.size(); ++y)
                EXPECT_NEAR(rr.jump(x, y), m.jump(x, y), 1e-11);
        }
    }
}

// ============================================================================
// Relative entropy rate and entropy production
// ============================================================================

TEST(RelativeEntropy, IdenticalModelsGiveZero) {
    EXPECT_NEAR(relative_entropy_rate(fx::two_state(), fx::two_state()), 0.0, 1e-14);
}

TEST(RelativeEntropy, TwoStatePairIsOneThird) {
    const double s = relative_entropy_rate(fx::two_state(), fx::two_state_tilde());
    EXPECT_NEAR(s, 1.0 / 3.0, 1e-12);
}

TEST(RelativeEntropy, BiasedCycleAgainstReversal) {
    CtmcModel m = fx::cycle3(0.9);
    const double s = relative_entropy_rate(m, reverse(m));
    EXPECT_NEAR(s, 0.8 * std::log(9.0), 1e-12);
    EXPECT_NEAR(s, 1.757780, 1e-5); // frozen display value
}

TEST(RelativeEntropy, NonnegativeAndZeroOnlyWhenEqual) {
    CounterRng rng(4, 0, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 2 + rep % 4;
        CtmcModel x = fx::random_model(n, rng);
        CtmcModel y = fx::random_model(n, rng);
        const double s = relative_entropy_rate(x, y);
        EXPECT_GE(s, 0.0);
        EXPECT_GT(s, 1e-6); // independently drawn models essentially never coincide
        EXPECT_NEAR(relative_entropy_rate(x, x), 0.0, 1e-13);
    }
}

TEST(RelativeEntropy, SupportMismatchIsInfinite) {
    CtmcModel x = fx::cycle3(0.9);
    CtmcModel pure; // forward-only cycle misses the backward transitions
    pure.states = x.states;
    pure.escape_rates = {1.0, 1.0, 1.0};
    pure.jump = Matrix(3, 3);
    for (std::size_t i = 0; i < 3; ++i) pure.jump(i, (i + 1) % 3) = 1.0;
    EXPECT_THROW(relative_entropy_rate(x, pure), absolute_continuity_error);
}

TEST(EntropyProduction, TwoStateChainsAreAlwaysReversible) {
    CounterRng rng(5, 0, 0);
    EXPECT_NEAR(entropy_production_rate(fx::two_state()), 0.0, 1e-12);
    for (int rep = 0; rep < 10; ++rep) {
        CtmcModel m = fx::random_model(2, rng);
        EXPECT_NEAR(entropy_production_rate(m), 0.0, 1e-12);
    }
}

TEST(EntropyProduction, BiasedCycleValueAndSymmetricZero) {
    EXPECT_NEAR(entropy_production_rate(fx::cycle3(0.9)), 0.8 * std::log(9.0), 1e-10);
    EXPECT_NEAR(entropy_production_rate(fx::cycle3(0.5)), 0.0, 1e-12);
}

TEST(EntropyProduction, DetailedBalanceCharacterization) {
    CounterRng rng(6, 0, 0);
    for (int rep = 0; rep < 8; ++rep) {
        CtmcModel m = fx::random_reversible(2 + rep % 4, rng);
        EXPECT_NEAR(entropy_production_rate(m), 0.0, 1e-12);
    }
    // and strictly positive off detailed balance
    EXPECT_GT(entropy_production_rate(fx::cycle3(0.7)), 1e-3);
}

// ============================================================================
// Discretized kernel and spectral gap
// ============================================================================

TEST(Discretized, TwoStateFrozenValues) {
    Matrix P = discretized_transition_matrix(fx::two_state(), 0.1);
    EXPECT_NEAR(P(0, 1), 0.0863939264, 1e-9);
    EXPECT_NEAR(P(1, 0), 0.1727878529, 1e-9);
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 2; ++j) s += P(i, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Discretized, MatchesClosedFormIndependentRoute) {
    // exp(delta L) = I + (1 - e^{-3 delta})/3 L for the two-state fixture
    for (double delta : {0.025, 0.1, 0.4, 1.3}) {
        Matrix P = discretized_transition_matrix(fx::two_state(), delta);
        const double f = (1.0 - std::exp(-3.0 * delta)) / 3.0;
        EXPECT_NEAR(P(0, 1), f, 1e-13);
        EXPECT_NEAR(P(1, 0), 2.0 * f, 1e-13);
    }
}

TEST(Discretized, RejectsNonPositiveDelta) {
    EXPECT_THROW(discretized_transition_matrix(fx::two_state(), 0.0), validation_error);
    EXPECT_THROW(discretized_transition_matrix(fx::two_state(), -0.1), validation_error);
}

TEST(Discretized, SmallDeltaRecoversGenerator) {
    GeneratorMatrix g = build_generator(fx::cycle3(0.9));
    Matrix P = discretized_transition_matrix(fx::cycle3(0.9), 1e-6);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR((P(i, j) - (i == j ? 1.0 : 0.0)) / 1e-6, g.L(i, j), 1e-5);
}

TEST(SpectralGap, ClosedForms) {
    EXPECT_NEAR(spectral_gap(build_generator(fx::two_state())), 3.0, 1e-10);
    EXPECT_NEAR(spectral_gap(build_generator(fx::cycle3(0.5))), 1.5, 1e-10);
    EXPECT_NEAR(spectral_gap(build_generator(fx::cycle3(0.9))), 1.5, 1e-10);
}

TEST(SpectralGap, ScalesLinearlyWithRates) {
    CtmcModel m = fx::two_state();
    const double g1 = spectral_gap(build_generator(m));
    for (double& c : m.escape_rates) c *= 2.0;
    EXPECT_NEAR(spectral_gap(build_generator(m)), 2.0 * g1, 1e-9);
}

// ============================================================================
// Block probabilities
// ============================================================================

TEST(BlockProbability, ChainRuleMatchesClosedFormKernel) {
    const double delta = 0.1;
    CtmcModel m = fx::two_state();
    StationaryDist mu = stationary_distribution(m);
    Matrix P = discretized_transition_matrix(m, delta);
    const double f = (1.0 - std::exp(-3.0 * delta)) / 3.0;
    // block (a, b, b): mu(a) P(a,b) P(b,b) with the closed-form kernel
    const std::vector<int> block{0, 1, 1};
    const double expect = (2.0 / 3.0) * f * (1.0 - 2.0 * f);
    EXPECT_NEAR(block_log_probability(mu, P, block), std::log(expect), 1e-12);
}

TEST(BlockProbability, AllBlocksSumToOne) {
    const double delta = 0.2;
    CtmcModel m = fx::two_state();
    StationaryDist mu = stationary_distribution(m);
    Matrix P = discretized_transition_matrix(m, delta);
    const std::size_t n = 6;
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> block(n);
        for (std::size_t i = 0; i < n; ++i) block[i] = (mask >> i) & 1u;
        total += std::exp(block_log_probability(mu, P, block));
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}
