#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Counter-based random numbers (Philox 4x32-10). A stream is addressed by
// (seed, replica, role); distinct addresses are statistically independent by
// construction, so replica farms need no sequential seeding discipline and
// results do not depend on thread scheduling.

namespace relent {

/// Addresses one random stream. Identical Seed => bit-identical draws.
struct Seed {
    std::uint64_t value = 0;    // experiment-level seed
    std::uint64_t replica = 0;  // replica index
    std::uint64_t role = 0;     // sub-stream within a replica
};

namespace detail {

struct PhiloxBlock {
    std::uint32_t v[4];
};

inline void philox_round(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2,
                         std::uint32_t& c3, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = 0xD2511F53ull * c0;
    const std::uint64_t p1 = 0xCD9E8D57ull * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0; c1 = n1; c2 = n2; c3 = n3;
}

inline PhiloxBlock philox4x32_10(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
    std::uint32_t c0 = static_cast<std::uint32_t>(ctr_lo);
    std::uint32_t c1 = static_cast<std::uint32_t>(ctr_lo >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(ctr_hi);
    std::uint32_t c3 = static_cast<std::uint32_t>(ctr_hi >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int r = 0; r < 10; ++r) {
        philox_round(c0, c1, c2, c3, k0, k1);
        k0 += 0x9E3779B9u; // golden-ratio key schedule
        k1 += 0xBB67AE85u;
    }
    return PhiloxBlock{{c0, c1, c2, c3}};
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

class CounterRng {
  public:
    CounterRng() : CounterRng(Seed{}) {}
    explicit CounterRng(Seed s)
        : key_(detail::mix64(s.value)),
          hi_(detail::mix64(s.replica * 0x632BE59BD9B4E019ull ^ detail::mix64(s.role ^ 0xA5A5A5A5DEADBEEFull))),
          ctr_(0), have_(0) {}

    CounterRng(std::uint64_t seed, std::uint64_t replica, std::uint64_t role)
        : CounterRng(Seed{seed, replica, role}) {}

    std::uint32_t next_u32() {
        if (have_ == 0) {
            block_ = detail::philox4x32_10(key_, hi_, ctr_++);
            have_ = 4;
        }
        return block_.v[4 - have_--];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1]; never returns 0.
    double uniform01_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Exponential with the given rate; strictly positive.
    double exponential(double rate) {
        double e = -std::log(uniform01_pos());
        if (e <= 0.0) e = 0x1.0p-53;
        return e / rate;
    }

    /// Sample an index from a probability row (assumed to sum to 1).
    std::size_t pick(const double* prob, std::size_t n) {
        double u = uniform01();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            u -= prob[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    }

    std::size_t pick(const std::vector<double>& prob) { return pick(prob.data(), prob.size()); }

  private:
    std::uint64_t key_;
    std::uint64_t hi_;
    std::uint64_t ctr_;
    int have_;
    detail::PhiloxBlock block_{};
};

/// Conventional role tags, so every consumer of randomness draws from its own
/// stream and experiments stay reproducible when components are reordered.
namespace role {
constexpr std::uint64_t path_x = 1;
constexpr std::uint64_t path_y = 2;
constexpr std::uint64_t path_x_prime = 3;
constexpr std::uint64_t path_gamma = 4;
constexpr std::uint64_t pattern = 5;
constexpr std::uint64_t smoothing = 6;
} // namespace role

} // namespace relent
