#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "relent/errors.hpp"
#include "relent/matching.hpp"
#include "relent/model.hpp"
#include "relent/scgf.hpp"
#include "relent/stats.hpp"
#include "relent/trajectory.hpp"

// Replicated experiments tying the matcher statistics back to the exact
// oracles: laws of large numbers for waiting and shadowing times, the
// central limit theorem, the empirical generating-function curve, the
// exponential hitting-time law, and the return-time diagnostic that shows
// why plain return times cannot be normalized.
//
// Replicas run concurrently; every random stream is addressed by
// (seed, replica, role) only, and aggregation happens in replica order, so
// reports are byte-identical regardless of thread count.

namespace relent {

enum class ExperimentKind {
    lln,
    lln_schedule,
    clt,
    ldp_empirical,
    expolaw,
    shadow,
    naive_return
};

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::lln: return "lln";
        case ExperimentKind::lln_schedule: return "lln_schedule";
        case ExperimentKind::clt: return "clt";
        case ExperimentKind::ldp_empirical: return "ldp_empirical";
        case ExperimentKind::expolaw: return "expolaw";
        case ExperimentKind::shadow: return "shadow";
        case ExperimentKind::naive_return: return "naive_return";
    }
    return "?";
}

/// delta_n = a * n^{-b}. Only exponents b < 1/2 keep log(n)/(n delta_n^2)
/// vanishing, which is the hypothesis the coupled-schedule limit needs.
struct DeltaSchedule {
    double a = 1.0;
    double b = 1.0 / 3.0;
    double at(std::size_t n) const { return a * std::pow(static_cast<double>(n), -b); }
};

enum class CltStatistic { waiting, loglik };
enum class ShadowGammaSource { fixed, from_model_q };

struct ExperimentPlan {
    ExperimentKind kind = ExperimentKind::lln;
    std::string name = "plan";
    CtmcModel model_x;
    CtmcModel model_y;
    bool y_is_reversal = false; // bookkeeping for reports

    double delta = 0.1;
    std::size_t n = 32;
    std::size_t replicas = 200;
    std::uint64_t budget = 100000000; // symbols per search
    std::uint64_t seed = 0;
    unsigned threads = 0; // 0 = hardware concurrency

    // lln_schedule
    DeltaSchedule schedule;
    std::vector<std::size_t> n_grid;
    double epsilon = 0.1;

    // clt
    CltStatistic clt_statistic = CltStatistic::waiting;

    // ldp_empirical
    std::vector<double> p_grid;

    // expolaw
    std::vector<std::size_t> pattern_lengths;
    std::size_t patterns_per_length = 2;
    std::size_t replicas_per_pattern = 2000;

    // naive_return
    std::vector<double> delta_grid;
    std::vector<std::size_t> n_per_delta;

    // shadow
    ShadowGammaSource gamma_source = ShadowGammaSource::from_model_q;
    std::optional<CtmcModel> model_q;
    std::optional<Trajectory> gamma;
};

/// Estimate-versus-oracle summary plus the per-replica table.
struct EstimateReport {
    std::string kind;
    double estimate = 0.0;
    double stderror = 0.0;
    double oracle = 0.0;
    double z = 0.0;
    std::size_t replicas_requested = 0;
    std::size_t replicas_used = 0;
    double censor_rate = 0.0;
    bool degenerate = false;
    std::vector<std::pair<std::string, double>> extras; // ordered summary fields
    std::vector<std::string> columns;                   // per-replica table
    std::vector<std::vector<double>> rows;
    std::vector<std::string> notes;

    void extra(const std::string& key, double v) { extras.emplace_back(key, v); }
    double get_extra(const std::string& key) const {
        for (const auto& [k, v] : extras)
            if (k == key) return v;
        throw validation_error("report has no field '" + key + "'");
    }
};

inline double z_score(double estimate, double oracle, double se) {
    if (se > 0.0) return (estimate - oracle) / se;
    return estimate == oracle ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Rejects invalid plans with a message naming the violated hypothesis.
inline void validate_plan(const ExperimentPlan& plan) {
    validate_model(plan.model_x);
    validate_model(plan.model_y);
    if (plan.model_x.size() != plan.model_y.size())
        throw validation_error("plan '" + plan.name + "': models live on different state spaces");
    if (plan.replicas == 0)
        throw validation_error("plan '" + plan.name + "': replica count must be positive");
    switch (plan.kind) {
        case ExperimentKind::lln:
        case ExperimentKind::clt:
        case ExperimentKind::ldp_empirical:
            if (!(plan.delta > 0.0))
                throw validation_error("plan '" + plan.name + "': delta must be > 0");
            if (plan.n < 1) throw validation_error("plan '" + plan.name + "': n must be >= 1");
            if (plan.budget < plan.n + 2)
                throw validation_error("plan '" + plan.name + "': budget smaller than one window");
            break;
        case ExperimentKind::lln_schedule: {
            if (plan.n_grid.empty())
                throw validation_error("plan '" + plan.name + "': empty n grid");
            if (!std::is_sorted(plan.n_grid.begin(), plan.n_grid.end()))
                throw validation_error("plan '" + plan.name + "': n grid must be ascending");
            if (!(plan.schedule.a > 0.0))
                throw validation_error("plan '" + plan.name + "': schedule prefactor a must be > 0");
            if (!(plan.schedule.b < 0.5))
                throw validation_error(
                    "plan '" + plan.name + "': schedule delta_n = a*n^(-b) with b = " +
                    std::to_string(plan.schedule.b) +
                    " violates the hypothesis log(n)/(n*delta_n^2) -> 0, which needs b < 1/2");
            if (!(plan.schedule.b > 0.0))
                throw validation_error("plan '" + plan.name +
                                       "': schedule exponent b must be > 0 so delta_n -> 0");
            break;
        }
        case ExperimentKind::expolaw:
            if (!(plan.delta > 0.0))
                throw validation_error("plan '" + plan.name + "': delta must be > 0");
            if (plan.pattern_lengths.empty())
                throw validation_error("plan '" + plan.name + "': no pattern lengths given");
            for (std::size_t n : plan.pattern_lengths)
                if (n < 1)
                    throw validation_error("plan '" + plan.name + "': pattern length must be >= 1");
            if (plan.replicas_per_pattern < 10)
                throw validation_error("plan '" + plan.name + "': needs >= 10 replicas per pattern");
            break;
        case ExperimentKind::naive_return:
            if (plan.delta_grid.empty() || plan.delta_grid.size() != plan.n_per_delta.size())
                throw validation_error("plan '" + plan.name +
                                       "': delta grid and per-delta n lists must align");
            for (double d : plan.delta_grid)
                if (!(d > 0.0))
                    throw validation_error("plan '" + plan.name + "': delta must be > 0");
            for (std::size_t n : plan.n_per_delta)
                if (n < 2)
                    throw validation_error("plan '" + plan.name + "': return blocks need n >= 2");
            break;
        case ExperimentKind::shadow:
            if (!(plan.delta > 0.0))
                throw validation_error("plan '" + plan.name + "': delta must be > 0");
            if (plan.n < 1) throw validation_error("plan '" + plan.name + "': n must be >= 1");
            if (plan.gamma_source == ShadowGammaSource::from_model_q) {
                if (!plan.model_q)
                    throw validation_error("plan '" + plan.name +
                                           "': shadow plan draws gamma from a chain but none was given");
                validate_model(*plan.model_q);
                if (plan.model_q->size() != plan.model_x.size())
                    throw validation_error("plan '" + plan.name +
                                           "': gamma chain lives on a different state space");
            } else if (!plan.gamma) {
                throw validation_error("plan '" + plan.name +
                                       "': shadow plan needs a fixed trajectory");
            } else if (plan.gamma->horizon <
                       static_cast<double>(plan.n) * plan.delta - 1e-12) {
                throw validation_error("plan '" + plan.name +
                                       "': fixed trajectory shorter than n*delta");
            }
            break;
    }
}

namespace detail {

/// Everything both chains contribute to one discretization level.
struct KernelPair {
    Matrix PX, PY;
    StationaryDist mux, muy;
    double delta = 0.0;
};

inline KernelPair make_kernels(const CtmcModel& x, const CtmcModel& y, double delta) {
    KernelPair k;
    k.PX = discretized_transition_matrix(x, delta);
    k.PY = discretized_transition_matrix(y, delta);
    k.mux = stationary_distribution(x);
    k.muy = stationary_distribution(y);
    k.delta = delta;
    return k;
}

/// Runs f(replica) for every replica index on a small thread pool; results
/// land in replica order. The first exception, if any, is rethrown.
template <class F>
void for_each_replica(std::size_t count, unsigned threads, F&& f) {
    unsigned nthreads = threads ? threads : std::thread::hardware_concurrency();
    if (nthreads == 0) nthreads = 1;
    nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, count));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// One waiting-time ratio draw: independent X block, Y target, X' target.
struct WaitingDraw {
    bool censored = true;
    double wy = 0.0;
    double wx = 0.0;
    double log_ratio = 0.0;
};

inline WaitingDraw waiting_ratio_draw(const KernelPair& k, std::size_t n, std::uint64_t budget,
                                      std::uint64_t seed, std::uint64_t replica) {
    KernelStream xs(k.PX, k.mux, CounterRng(seed, replica, role::path_x));
    std::vector<int> base(n + 1);
    for (auto& s : base) s = xs.next();
    const std::span<const int> block(base.data() + 1, n);
    KernelStream ys(k.PY, k.muy, CounterRng(seed, replica, role::path_y));
    const MatchResult wy = waiting_time(block, ys, budget);
    if (wy.censored) return {};
    KernelStream xps(k.PX, k.mux, CounterRng(seed, replica, role::path_x_prime));
    const MatchResult wx = waiting_time(block, xps, budget);
    if (wx.censored) return {};
    WaitingDraw d;
    d.censored = false;
    d.wy = static_cast<double>(wy.value);
    d.wx = static_cast<double>(wx.value);
    d.log_ratio = std::log(d.wy) - std::log(d.wx);
    return d;
}

} // namespace detail

// ===========================================================================
// Law of large numbers for waiting-time ratios
// ===========================================================================

inline EstimateReport run_lln(const ExperimentPlan& plan) {
    validate_plan(plan);
    const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_y, plan.delta);
    const double oracle = relative_entropy_rate(plan.model_x, plan.model_y);
    const double nd = static_cast<double>(plan.n) * plan.delta;

    std::vector<detail::WaitingDraw> draws(plan.replicas);
    detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
        draws[r] = detail::waiting_ratio_draw(k, plan.n, plan.budget, plan.seed, r);
    });

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.replicas_requested = plan.replicas;
    rep.columns = {"replica", "censored", "w_xy", "w_xx", "estimate"};
    SampleStats st;
    std::size_t censored = 0;
    for (std::size_t r = 0; r < plan.replicas; ++r) {
        const detail::WaitingDraw& d = draws[r];
        if (d.censored) {
            ++censored;
            rep.rows.push_back({static_cast<double>(r), 1.0, 0.0, 0.0, 0.0});
            continue;
        }
        const double v = d.log_ratio / nd;
        st.add(v);
        rep.rows.push_back({static_cast<double>(r), 0.0, d.wy, d.wx, v});
    }
    if (st.count == 0)
        throw numeric_error("lln: every replica was censored; raise the budget or lower n "
                            "(block entropy ~ n*h_delta must stay well below log budget)");
    rep.replicas_used = st.count;
    rep.censor_rate = static_cast<double>(censored) / static_cast<double>(plan.replicas);
    rep.estimate = st.mean;
    rep.stderror = st.stderror();
    rep.oracle = oracle;
    rep.z = z_score(rep.estimate, rep.oracle, rep.stderror);
    const DiscreteMoments mo = discrete_mean_and_variance(k.PX, k.PY, k.mux, plan.delta);
    rep.extra("m_delta_over_delta", mo.mean / plan.delta);
    rep.extra("n", static_cast<double>(plan.n));
    rep.extra("delta", plan.delta);
    return rep;
}

// ===========================================================================
// Coupled (n, delta_n) schedule
// ===========================================================================

inline EstimateReport run_lln_schedule(const ExperimentPlan& plan) {
    validate_plan(plan);
    const double oracle = relative_entropy_rate(plan.model_x, plan.model_y);

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.replicas_requested = plan.replicas * plan.n_grid.size();
    rep.columns = {"n", "delta_n", "replica", "censored", "estimate", "within_eps"};
    std::size_t censored_total = 0;
    double last_fraction = 0.0, last_estimate = 0.0, last_stderr = 0.0;
    for (std::size_t gi = 0; gi < plan.n_grid.size(); ++gi) {
        const std::size_t n = plan.n_grid[gi];
        const double delta_n = plan.schedule.at(n);
        const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_y, delta_n);
        std::vector<detail::WaitingDraw> draws(plan.replicas);
        detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
            draws[r] = detail::waiting_ratio_draw(k, n, plan.budget, plan.seed,
                                                  gi * plan.replicas + r);
        });
        SampleStats st;
        std::size_t within = 0, used = 0;
        for (std::size_t r = 0; r < plan.replicas; ++r) {
            const detail::WaitingDraw& d = draws[r];
            if (d.censored) {
                ++censored_total;
                rep.rows.push_back({static_cast<double>(n), delta_n, static_cast<double>(r), 1.0,
                                    0.0, 0.0});
                continue;
            }
            const double v = d.log_ratio / (static_cast<double>(n) * delta_n);
            const bool hit = std::abs(v - oracle) <= plan.epsilon;
            st.add(v);
            ++used;
            within += hit ? 1u : 0u;
            rep.rows.push_back({static_cast<double>(n), delta_n, static_cast<double>(r), 0.0, v,
                                hit ? 1.0 : 0.0});
        }
        const double fraction =
            used ? static_cast<double>(within) / static_cast<double>(used) : 0.0;
        rep.extra("estimate_n" + std::to_string(n), st.count ? st.mean : 0.0);
        rep.extra("fraction_within_eps_n" + std::to_string(n), fraction);
        rep.extra("censored_n" + std::to_string(n),
                  static_cast<double>(plan.replicas - used) / static_cast<double>(plan.replicas));
        last_fraction = fraction;
        last_estimate = st.count ? st.mean : 0.0;
        last_stderr = st.stderror();
        rep.replicas_used += used;
    }
    rep.censor_rate = static_cast<double>(censored_total) / static_cast<double>(rep.replicas_requested);
    rep.estimate = last_estimate;
    rep.stderror = last_stderr;
    rep.oracle = oracle;
    rep.z = z_score(rep.estimate, rep.oracle, rep.stderror);
    rep.extra("fraction_within_eps_final", last_fraction);
    rep.extra("epsilon", plan.epsilon);
    return rep;
}

// ===========================================================================
// Central limit theorem
// ===========================================================================

inline EstimateReport run_clt(const ExperimentPlan& plan) {
    validate_plan(plan);
    const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_y, plan.delta);
    const DiscreteMoments mo = discrete_mean_and_variance(k.PX, k.PY, k.mux, plan.delta);
    const double s_rate = relative_entropy_rate(plan.model_x, plan.model_y);
    const double sqn = std::sqrt(static_cast<double>(plan.n));

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.replicas_requested = plan.replicas;
    rep.columns = {"replica", "censored", "statistic", "statistic_s_centered"};

    if (mo.variance < 1e-14) {
        rep.degenerate = true;
        rep.notes.push_back("sigma_delta^2 = 0: the two kernels coincide and the statistic "
                            "degenerates to 0");
        rep.extra("sigma_delta_sq", mo.variance);
        rep.extra("m_delta", mo.mean);
        return rep;
    }

    // log-likelihood table for the surrogate statistic
    Matrix logratio(k.PX.rows, k.PX.cols);
    for (std::size_t a = 0; a < k.PX.rows; ++a)
        for (std::size_t b = 0; b < k.PX.cols; ++b)
            logratio(a, b) = (k.PX(a, b) > 0.0) ? std::log(k.PX(a, b) / k.PY(a, b)) : 0.0;

    std::vector<double> stat(plan.replicas), stat_alt(plan.replicas);
    std::vector<char> censored(plan.replicas, 0);
    detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
        double sum = 0.0;
        if (plan.clt_statistic == CltStatistic::waiting) {
            const detail::WaitingDraw d =
                detail::waiting_ratio_draw(k, plan.n, plan.budget, plan.seed, r);
            if (d.censored) { censored[r] = 1; return; }
            sum = d.log_ratio;
        } else {
            KernelStream xs(k.PX, k.mux, CounterRng(plan.seed, r, role::path_x));
            int prev = xs.next(); // grid 0, not part of the sum
            prev = xs.next();     // grid 1
            for (std::size_t i = 1; i <= plan.n; ++i) {
                const int nxt = xs.next();
                sum += logratio(static_cast<std::size_t>(prev), static_cast<std::size_t>(nxt));
                prev = nxt;
            }
        }
        stat[r] = (sum - static_cast<double>(plan.n) * mo.mean) / sqn;
        stat_alt[r] = (sum - static_cast<double>(plan.n) * plan.delta * s_rate) / sqn;
    });

    SampleStats st;
    std::vector<double> sample;
    for (std::size_t r = 0; r < plan.replicas; ++r) {
        if (censored[r]) {
            rep.rows.push_back({static_cast<double>(r), 1.0, 0.0, 0.0});
            continue;
        }
        st.add(stat[r]);
        sample.push_back(stat[r]);
        rep.rows.push_back({static_cast<double>(r), 0.0, stat[r], stat_alt[r]});
    }
    if (st.count < 2) throw numeric_error("clt: not enough uncensored replicas");
    rep.replicas_used = st.count;
    rep.censor_rate =
        static_cast<double>(plan.replicas - st.count) / static_cast<double>(plan.replicas);
    rep.estimate = st.mean;
    rep.oracle = 0.0;
    rep.stderror = st.stderror();
    rep.z = z_score(rep.estimate, rep.oracle, rep.stderror);

    const double sd = std::sqrt(mo.variance);
    const double ks = ks_statistic(sample, [sd](double x) { return normal_cdf(x, 0.0, sd); });
    rep.extra("ks_stat", ks);
    rep.extra("ks_pvalue", ks_pvalue(ks, st.count));
    rep.extra("variance_ratio", st.variance() / mo.variance);
    rep.extra("sigma_delta_sq", mo.variance);
    rep.extra("sigma_delta_sq_over_delta", mo.variance / plan.delta);
    rep.extra("m_delta", mo.mean);
    rep.extra("mean_s_centered", [&] {
        SampleStats alt;
        for (std::size_t r = 0; r < plan.replicas; ++r)
            if (!censored[r]) alt.add(stat_alt[r]);
        return alt.mean;
    }());
    return rep;
}

// ===========================================================================
// Empirical generating function (moments of the waiting-time ratio)
// ===========================================================================

inline EstimateReport run_ldp_empirical(const ExperimentPlan& plan) {
    validate_plan(plan);
    if (plan.p_grid.empty())
        throw validation_error("ldp plan: empty p grid");
    for (double p : plan.p_grid)
        if (std::abs(p) > 0.8)
            throw validation_error(
                "ldp plan: p = " + std::to_string(p) +
                " outside [-0.8, 0.8]; empirical moments blow up toward the divergence at |p| = 1");
    const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_y, plan.delta);
    const double nd = static_cast<double>(plan.n) * plan.delta;

    std::vector<detail::WaitingDraw> draws(plan.replicas);
    detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
        draws[r] = detail::waiting_ratio_draw(k, plan.n, plan.budget, plan.seed, r);
    });

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.replicas_requested = plan.replicas;
    rep.columns = {"replica", "censored", "log_ratio"};
    std::vector<double> diffs;
    for (std::size_t r = 0; r < plan.replicas; ++r) {
        if (draws[r].censored) {
            rep.rows.push_back({static_cast<double>(r), 1.0, 0.0});
            continue;
        }
        diffs.push_back(draws[r].log_ratio);
        rep.rows.push_back({static_cast<double>(r), 0.0, draws[r].log_ratio});
    }
    if (diffs.empty()) throw numeric_error("ldp: every replica was censored");
    rep.replicas_used = diffs.size();
    rep.censor_rate =
        static_cast<double>(plan.replicas - diffs.size()) / static_cast<double>(plan.replicas);

    // per-p: empirical scgf value, oracle curves, effective sample size
    const CtmcModel& x = plan.model_x;
    const CtmcModel& y = plan.model_y;
    double worst_sym = 0.0;
    bool any_sym = false;
    for (double p : plan.p_grid) {
        double sum = 0.0, sum2 = 0.0;
        for (double d : diffs) {
            const double w = std::exp(p * d);
            sum += w;
            sum2 += w * w;
        }
        const double mean = sum / static_cast<double>(diffs.size());
        const double value = std::log(mean) / nd;
        const double ess = sum * sum / std::max(sum2, 1e-300);
        const std::string tag = "p" + std::to_string(p);
        rep.extra("empirical_" + tag, value);
        rep.extra("oracle_fdelta_" + tag,
                  discrete_scgf_value(k.PX, k.PY, plan.delta, p));
        rep.extra("oracle_e_" + tag, continuous_scgf_value(x, y, p));
        rep.extra("ess_" + tag, ess);
        if (ess < 30.0)
            rep.notes.push_back("effective sample size below 30 at p = " + std::to_string(p) +
                                "; heavy-tailed moment, treat with care");
    }
    // fluctuation-symmetry residual on p and -1-p pairs inside the grid
    if (plan.y_is_reversal) {
        for (double p : plan.p_grid) {
            const double q = -1.0 - p;
            bool in_grid = false;
            for (double pg : plan.p_grid) in_grid |= std::abs(pg - q) < 1e-12;
            if (!in_grid) continue;
            double mp = 0.0, mq = 0.0;
            for (double d : diffs) {
                mp += std::exp(p * d);
                mq += std::exp(q * d);
            }
            const double res = std::abs(std::log(mp) - std::log(mq)) / nd;
            rep.extra("symmetry_residual_p" + std::to_string(p), res);
            worst_sym = std::max(worst_sym, res);
            any_sym = true;
        }
        if (any_sym) rep.extra("symmetry_residual_max", worst_sym);
    }
    rep.estimate = 0.0;
    rep.oracle = 0.0;
    rep.stderror = 0.0;
    rep.z = 0.0;
    return rep;
}

// ===========================================================================
// Exponential law of rescaled hitting times
// ===========================================================================

inline EstimateReport run_expolaw(const ExperimentPlan& plan) {
    validate_plan(plan);
    const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_x, plan.delta);

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.columns = {"pattern", "n", "replica", "censored", "hit", "rescaled", "smoothed"};

    std::vector<double> pooled;
    double eta_min = std::numeric_limits<double>::infinity();
    double eta_max = 0.0;
    std::size_t pattern_index = 0;
    std::size_t censored_total = 0, total = 0;
    bool inconclusive = false;

    for (std::size_t n : plan.pattern_lengths) {
        for (std::size_t j = 0; j < plan.patterns_per_length; ++j, ++pattern_index) {
            // draw the pattern itself from the stationary discretized chain
            KernelStream ps(k.PX, k.mux, CounterRng(plan.seed, pattern_index, role::pattern));
            (void)ps.next(); // grid 0 is not part of the block
            std::vector<int> pattern(n + 1);
            for (auto& s : pattern) s = ps.next();
            const double logp = block_log_probability(k.mux, k.PX, pattern);
            const double block_prob = std::exp(logp);

            std::vector<double> smoothed, rescaled;
            std::vector<char> cens(plan.replicas_per_pattern, 0);
            std::vector<double> hitv(plan.replicas_per_pattern, 0.0),
                resv(plan.replicas_per_pattern, 0.0), smov(plan.replicas_per_pattern, 0.0);
            detail::for_each_replica(plan.replicas_per_pattern, plan.threads, [&](std::size_t r) {
                const std::uint64_t rid = pattern_index * plan.replicas_per_pattern + r;
                KernelStream target(k.PX, k.mux, CounterRng(plan.seed, rid, role::path_x));
                const MatchResult m =
                    hitting_time(std::span<const int>(pattern), target, plan.budget);
                if (m.censored) { cens[r] = 1; return; }
                CounterRng jitter(plan.seed, rid, role::smoothing);
                const double t = static_cast<double>(m.value);
                hitv[r] = t;
                resv[r] = t * block_prob;
                smov[r] = (t - jitter.uniform01()) * block_prob;
            });
            for (std::size_t r = 0; r < plan.replicas_per_pattern; ++r) {
                ++total;
                if (cens[r]) {
                    ++censored_total;
                    rep.rows.push_back({static_cast<double>(pattern_index),
                                        static_cast<double>(n), static_cast<double>(r), 1.0, 0.0,
                                        0.0, 0.0});
                    continue;
                }
                rescaled.push_back(resv[r]);
                smoothed.push_back(smov[r]);
                rep.rows.push_back({static_cast<double>(pattern_index), static_cast<double>(n),
                                    static_cast<double>(r), 0.0, hitv[r], resv[r], smov[r]});
            }
            const std::string tag = "pattern" + std::to_string(pattern_index);
            if (smoothed.size() < 10) {
                inconclusive = true;
                rep.notes.push_back("pattern " + std::to_string(pattern_index) +
                                    ": too many censored replicas, law fit inconclusive");
                rep.extra(tag + "_inconclusive", 1.0);
                continue;
            }
            const double eta = exponential_mle_rate(smoothed);
            const double ks =
                ks_statistic(smoothed, [eta](double u) { return 1.0 - std::exp(-eta * u); });
            const double pv = ks_pvalue(ks, smoothed.size());
            eta_min = std::min(eta_min, eta);
            eta_max = std::max(eta_max, eta);
            rep.extra(tag + "_n", static_cast<double>(n));
            rep.extra(tag + "_log_block_prob", logp);
            rep.extra(tag + "_eta", eta);
            rep.extra(tag + "_ks_stat", ks);
            rep.extra(tag + "_ks_pvalue", pv);
            for (double u : smoothed) pooled.push_back(eta * u);
        }
    }
    rep.replicas_requested = total;
    rep.replicas_used = total - censored_total;
    rep.censor_rate = total ? static_cast<double>(censored_total) / static_cast<double>(total) : 0.0;
    rep.degenerate = inconclusive;
    if (!pooled.empty()) {
        const double ks = ks_statistic(pooled, [](double u) { return 1.0 - std::exp(-u); });
        rep.extra("pooled_ks_stat", ks);
        rep.extra("pooled_ks_pvalue", ks_pvalue(ks, pooled.size()));
        rep.extra("pooled_count", static_cast<double>(pooled.size()));
        // pooled test at ~2000-sample resolution (deterministic stride)
        const std::size_t stride = std::max<std::size_t>(1, pooled.size() / 2000);
        std::vector<double> sub;
        for (std::size_t i = 0; i < pooled.size(); i += stride) sub.push_back(pooled[i]);
        const double ks2 = ks_statistic(sub, [](double u) { return 1.0 - std::exp(-u); });
        rep.extra("pooled2000_ks_pvalue", ks_pvalue(ks2, sub.size()));
        rep.extra("pooled2000_count", static_cast<double>(sub.size()));
        double min_pattern_p = 1.0;
        for (const auto& [k, v] : rep.extras)
            if (k.size() > 10 && k.compare(k.size() - 10, 10, "_ks_pvalue") == 0 &&
                k.rfind("pattern", 0) == 0)
                min_pattern_p = std::min(min_pattern_p, v);
        rep.extra("min_pattern_ks_pvalue", min_pattern_p);
    }
    if (eta_max > 0.0) {
        rep.extra("eta_min", eta_min);
        rep.extra("eta_max", eta_max);
    }
    rep.estimate = 0.0;
    rep.oracle = 0.0;
    rep.stderror = 0.0;
    rep.z = 0.0;
    return rep;
}

// ===========================================================================
// Naive return-time diagnostic
// ===========================================================================

inline EstimateReport run_naive_return(const ExperimentPlan& plan) {
    validate_plan(plan);
    const StationaryDist mu = stationary_distribution(plan.model_x);
    const CtmcModel& m = plan.model_x;

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.columns = {"delta", "n", "replica", "censored", "r", "estimate"};

    std::vector<double> deltas, estimates;
    std::size_t censored_total = 0, total = 0;
    for (std::size_t gi = 0; gi < plan.delta_grid.size(); ++gi) {
        const double delta = plan.delta_grid[gi];
        const std::size_t n = plan.n_per_delta[gi];
        const Matrix P = discretized_transition_matrix(m, delta);
        std::vector<double> vals(plan.replicas, 0.0);
        std::vector<char> cens(plan.replicas, 0);
        detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
            KernelStream src(P, mu, CounterRng(plan.seed, gi * plan.replicas + r, role::path_x));
            const MatchResult res = return_time_stream(src, n, plan.budget);
            if (res.censored) { cens[r] = 1; return; }
            vals[r] = static_cast<double>(res.value);
        });
        SampleStats st;
        for (std::size_t r = 0; r < plan.replicas; ++r) {
            ++total;
            if (cens[r]) {
                ++censored_total;
                rep.rows.push_back({delta, static_cast<double>(n), static_cast<double>(r), 1.0,
                                    0.0, 0.0});
                continue;
            }
            const double est = -std::log(vals[r]) / static_cast<double>(n);
            st.add(est);
            rep.rows.push_back({delta, static_cast<double>(n), static_cast<double>(r), 0.0,
                                vals[r], est});
        }
        if (st.count == 0)
            throw numeric_error("naive_return: every replica censored at delta = " +
                                std::to_string(delta));
        // closed-form expansion and the exact discretized-entropy value
        double expansion = 0.0, exact = 0.0;
        for (std::size_t x = 0; x < m.size(); ++x) {
            const double c = m.escape_rates[x];
            expansion += mu[x] * (1.0 - delta * c) * std::log(1.0 - delta * c);
            for (std::size_t y = 0; y < m.size(); ++y) {
                if (y != x && m.jump(x, y) > 0.0) {
                    const double rate = c * m.jump(x, y);
                    expansion += mu[x] * delta * rate * std::log(delta * rate);
                }
                if (P(x, y) > 0.0) exact += mu[x] * P(x, y) * std::log(P(x, y));
            }
        }
        const std::string tag = "delta" + std::to_string(delta);
        rep.extra(tag + "_estimate", st.mean);
        rep.extra(tag + "_stderr", st.stderror());
        rep.extra(tag + "_expansion", expansion);
        rep.extra(tag + "_exact", exact);
        rep.extra(tag + "_n", static_cast<double>(n));
        deltas.push_back(delta);
        estimates.push_back(st.mean);
    }
    rep.replicas_requested = total;
    rep.replicas_used = total - censored_total;
    rep.censor_rate = total ? static_cast<double>(censored_total) / static_cast<double>(total) : 0.0;

    // fit a + b*delta + c*delta*log(delta); the delta*log(delta) weight is
    // the non-normalizability signature and should match sum_x mu(x) c(x)
    if (deltas.size() >= 3) {
        const std::vector<std::function<double(double)>> basis{
            [](double) { return 1.0; },
            [](double d) { return d; },
            [](double d) { return d * std::log(d); },
        };
        const std::vector<double> coef = least_squares_fit(deltas, estimates, basis);
        double mean_rate = 0.0;
        for (std::size_t x = 0; x < m.size(); ++x) mean_rate += mu[x] * m.escape_rates[x];
        rep.extra("fit_const", coef[0]);
        rep.extra("fit_delta", coef[1]);
        rep.extra("fit_deltalogdelta", coef[2]);
        rep.extra("oracle_deltalogdelta", mean_rate);
    }
    rep.estimate = estimates.empty() ? 0.0 : estimates.back();
    rep.oracle = 0.0;
    rep.stderror = 0.0;
    rep.z = 0.0;
    return rep;
}

// ===========================================================================
// Shadowing a given trajectory
// ===========================================================================

inline EstimateReport run_shadow(const ExperimentPlan& plan) {
    validate_plan(plan);
    const detail::KernelPair k = detail::make_kernels(plan.model_x, plan.model_y, plan.delta);
    const GirsanovEvaluator ev(plan.model_x, plan.model_y);
    const double nd = static_cast<double>(plan.n) * plan.delta;

    // flux-form oracle for gamma drawn from an ergodic chain q
    double flux_oracle = 0.0;
    if (plan.gamma_source == ShadowGammaSource::from_model_q) {
        const CtmcModel& q = *plan.model_q;
        const StationaryDist muq = stationary_distribution(q);
        for (std::size_t a = 0; a < q.size(); ++a) {
            for (std::size_t b = 0; b < q.size(); ++b) {
                if (b == a || q.rate(a, b) == 0.0) continue;
                const double rx = plan.model_x.rate(a, b);
                const double ry = plan.model_y.rate(a, b);
                if (rx == 0.0 || ry == 0.0)
                    throw absolute_continuity_error(
                        "shadow: gamma visits a transition with zero intensity under a model");
                flux_oracle += muq[a] * q.rate(a, b) * std::log(rx / ry);
            }
            flux_oracle += muq[a] * (plan.model_y.escape_rates[a] - plan.model_x.escape_rates[a]);
        }
    }
    // functional-form oracle for a fixed gamma
    double functional_oracle = 0.0;
    if (plan.gamma_source == ShadowGammaSource::fixed)
        functional_oracle = ev.increment(*plan.gamma, 0.0, nd) / nd;

    struct Draw {
        int status = 0; // 0 ok, 1 censored, 2 zero-hit
        double value = 0.0;
        double functional = 0.0;
    };
    std::vector<Draw> draws(plan.replicas);
    detail::for_each_replica(plan.replicas, plan.threads, [&](std::size_t r) {
        Trajectory local_gamma;
        const Trajectory* gamma = nullptr;
        if (plan.gamma_source == ShadowGammaSource::from_model_q) {
            local_gamma = simulate(*plan.model_q, (static_cast<double>(plan.n) + 1.0) * plan.delta,
                                   CounterRng(plan.seed, r, role::path_gamma));
            gamma = &local_gamma;
        } else {
            gamma = &*plan.gamma;
        }
        const std::vector<int> pattern = shadow_pattern(*gamma, plan.delta, plan.n);
        KernelStream xs(k.PX, k.mux, CounterRng(plan.seed, r, role::path_x));
        const MatchResult tx =
            shadow_hitting_time(*gamma, xs, plan.delta, plan.n, plan.budget);
        KernelStream ys(k.PY, k.muy, CounterRng(plan.seed, r, role::path_y));
        const MatchResult ty =
            shadow_hitting_time(*gamma, ys, plan.delta, plan.n, plan.budget);
        if (tx.censored || ty.censored) { draws[r].status = 1; return; }
        if (tx.value == 0 || ty.value == 0) { draws[r].status = 2; return; }
        draws[r].value = (std::log(static_cast<double>(ty.value)) -
                          std::log(static_cast<double>(tx.value))) /
                         nd;
        draws[r].functional = ev.increment(*gamma, 0.0, nd) / nd;
    });

    EstimateReport rep;
    rep.kind = to_string(plan.kind);
    rep.replicas_requested = plan.replicas;
    rep.columns = {"replica", "censored", "zero_hit", "estimate", "gamma_functional"};
    SampleStats st, st_func;
    std::size_t censored = 0, zero_hits = 0;
    for (std::size_t r = 0; r < plan.replicas; ++r) {
        const Draw& d = draws[r];
        if (d.status == 1) {
            ++censored;
            rep.rows.push_back({static_cast<double>(r), 1.0, 0.0, 0.0, 0.0});
            continue;
        }
        if (d.status == 2) {
            ++zero_hits;
            rep.rows.push_back({static_cast<double>(r), 0.0, 1.0, 0.0, 0.0});
            continue;
        }
        st.add(d.value);
        st_func.add(d.functional);
        rep.rows.push_back({static_cast<double>(r), 0.0, 0.0, d.value, d.functional});
    }
    if (st.count == 0) throw numeric_error("shadow: every replica censored");
    rep.replicas_used = st.count;
    rep.censor_rate = static_cast<double>(censored) / static_cast<double>(plan.replicas);
    rep.estimate = st.mean;
    rep.stderror = st.stderror();
    rep.oracle = plan.gamma_source == ShadowGammaSource::fixed ? functional_oracle : flux_oracle;
    rep.z = z_score(rep.estimate, rep.oracle, rep.stderror);
    rep.extra("zero_hit_count", static_cast<double>(zero_hits));
    rep.extra("gamma_functional_mean", st_func.count ? st_func.mean : 0.0);
    if (plan.gamma_source == ShadowGammaSource::from_model_q)
        rep.extra("flux_oracle", flux_oracle);
    else
        rep.extra("functional_oracle", functional_oracle);
    return rep;
}

inline EstimateReport run_experiment(const ExperimentPlan& plan) {
    switch (plan.kind) {
        case ExperimentKind::lln: return run_lln(plan);
        case ExperimentKind::lln_schedule: return run_lln_schedule(plan);
        case ExperimentKind::clt: return run_clt(plan);
        case ExperimentKind::ldp_empirical: return run_ldp_empirical(plan);
        case ExperimentKind::expolaw: return run_expolaw(plan);
        case ExperimentKind::shadow: return run_shadow(plan);
        case ExperimentKind::naive_return: return run_naive_return(plan);
    }
    throw validation_error("unknown experiment kind");
}

} // namespace relent
