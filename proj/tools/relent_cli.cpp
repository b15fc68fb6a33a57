// relent: command-line front end for the waiting-time relative-entropy
// estimators and their exact oracles.
//
// Subcommands:
//   validate  parse a config and check every model/plan invariant
//   exact     print the deterministic oracles for a model (pair)
//   run       execute a named experiment plan, write CSV + JSON reports
//   list      list the models and plans a config defines
//
// Exit codes: 0 ok; 1 usage error; 2 --strict and |z| > 3; 3 validation or
// numeric failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relent/estimators.hpp"
#include "relent/io.hpp"
#include "relent/matching.hpp"
#include "relent/model.hpp"
#include "relent/scgf.hpp"

namespace fs = std::filesystem;
using namespace relent;

namespace {

struct CliError {
    int code;
    std::string message;
};

Config load_config_or_die(const std::string& path) {
    if (path.empty()) throw CliError{1, "no --config given"};
    return load_config(path);
}

const CtmcModel& find_model(const Config& cfg, const std::string& name) {
    auto it = cfg.models.find(name);
    if (it == cfg.models.end()) throw CliError{1, "unknown model '" + name + "'"};
    return it->second;
}

int cmd_validate(const std::string& config_path) {
    Config cfg = load_config_or_die(config_path);
    bool all_ok = true;
    for (const auto& [name, model] : cfg.models) {
        try {
            validate_model(model);
            std::printf("model %-20s PASS\n", name.c_str());
        } catch (const std::exception& e) {
            std::printf("model %-20s FAIL %s\n", name.c_str(), e.what());
            all_ok = false;
        }
    }
    for (const auto& [name, spec] : cfg.plans) {
        try {
            ExperimentPlan plan = resolve_plan(cfg, spec);
            if (plan.kind == ExperimentKind::shadow &&
                plan.gamma_source == ShadowGammaSource::fixed && !plan.gamma) {
                const std::string text = read_file(spec.gamma_file);
                plan.gamma = trajectory_from_csv(text, plan.model_x.states, spec.gamma_file);
            }
            validate_plan(plan);
            std::printf("plan  %-20s PASS\n", name.c_str());
        } catch (const std::exception& e) {
            std::printf("plan  %-20s FAIL %s\n", name.c_str(), e.what());
            all_ok = false;
        }
    }
    return all_ok ? 0 : 3;
}

int cmd_list(const std::string& config_path) {
    Config cfg = load_config_or_die(config_path);
    for (const auto& [name, model] : cfg.models)
        std::printf("model %-20s states=%zu\n", name.c_str(), model.size());
    for (const auto& [name, spec] : cfg.plans)
        std::printf("plan  %-20s kind=%s model_x=%s model_y=%s\n", name.c_str(),
                    to_string(spec.plan.kind), spec.model_x.c_str(), spec.model_y.c_str());
    return 0;
}

int cmd_exact(const std::string& config_path, const std::string& model_name,
              const std::string& model2_name, bool reversed, double delta,
              const std::string& out_dir) {
    Config cfg = load_config_or_die(config_path);
    const CtmcModel& x = find_model(cfg, model_name);
    validate_model(x);
    const GeneratorMatrix gen = build_generator(x);
    const StationaryDist mu = stationary_distribution(gen);

    std::printf("model %s: %zu states\n", model_name.c_str(), x.size());
    std::printf("stationary law:");
    for (std::size_t i = 0; i < x.size(); ++i)
        std::printf(" %s=%.12g", x.states[i].c_str(), mu[i]);
    std::printf("\n");
    std::printf("spectral gap: %.12g\n", spectral_gap(gen));
    std::printf("entropy production rate: %.12g\n", entropy_production_rate(x));

    std::optional<CtmcModel> y;
    std::string y_name;
    if (reversed) {
        y = reverse(x, mu);
        y_name = model_name + "_reversed";
    } else if (!model2_name.empty()) {
        y = find_model(cfg, model2_name);
        y_name = model2_name;
    }
    if (y) {
        const double s = relative_entropy_rate(x, *y);
        std::printf("relative entropy rate vs %s: %.12g\n", y_name.c_str(), s);
        const ScgfCurve e_curve = continuous_scgf(x, *y);
        const Matrix px = discretized_transition_matrix(x, delta);
        const Matrix py = discretized_transition_matrix(*y, delta);
        const ScgfCurve f_curve = discrete_scgf(px, py, mu, delta);
        const DiscreteMoments mo = discrete_mean_and_variance(px, py, mu, delta);
        std::printf("delta=%.6g: m_delta/delta=%.12g sigma_delta^2=%.12g\n", delta,
                    mo.mean / delta, mo.variance);
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            write_file((fs::path(out_dir) / "scgf_continuous.csv").string(), curve_to_csv(e_curve));
            write_file((fs::path(out_dir) / "scgf_discrete.csv").string(), curve_to_csv(f_curve));
            write_file((fs::path(out_dir) / "rate_function.csv").string(),
                       rate_function_to_csv(legendre_transform(e_curve)));
            std::printf("wrote curves to %s\n", out_dir.c_str());
        }
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& plan_name,
            std::optional<std::uint64_t> seed, std::optional<std::size_t> replicas,
            std::optional<double> delta, std::optional<std::size_t> n,
            std::optional<std::uint64_t> budget, std::string out_dir, bool strict) {
    Config cfg = load_config_or_die(config_path);
    const PlanSpec* spec = nullptr;
    for (const auto& [name, s] : cfg.plans)
        if (name == plan_name) { spec = &s; break; }
    if (!spec) throw CliError{1, "unknown plan '" + plan_name + "'"};

    ExperimentPlan plan = resolve_plan(cfg, *spec);
    if (cfg.seed_given && plan.seed == 0) plan.seed = cfg.seed;
    if (seed) plan.seed = *seed;
    if (replicas) plan.replicas = *replicas;
    if (delta) plan.delta = *delta;
    if (n) plan.n = *n;
    if (budget) plan.budget = *budget;
    if (plan.kind == ExperimentKind::shadow && plan.gamma_source == ShadowGammaSource::fixed) {
        const std::string text = read_file(spec->gamma_file);
        plan.gamma = trajectory_from_csv(text, plan.model_x.states, spec->gamma_file);
    }
    validate_plan(plan);

    if (out_dir.empty()) out_dir = cfg.output_dir;
    fs::create_directories(out_dir);

    const EstimateReport rep = run_experiment(plan);

    const fs::path base = fs::path(out_dir) / plan_name;
    write_file(base.string() + "_replicas.csv", report_rows_to_csv(rep));
    write_file(base.string() + "_summary.json", report_summary_to_json(rep, plan).dump(2) + "\n");
    std::printf("%s: estimate=%.6g stderr=%.6g oracle=%.6g z=%+.3f censoring=%.4f -> %s\n",
                plan_name.c_str(), rep.estimate, rep.stderror, rep.oracle, rep.z, rep.censor_rate,
                out_dir.c_str());
    for (const std::string& note : rep.notes) std::printf("note: %s\n", note.c_str());
    if (strict && std::abs(rep.z) > 3.0) return 2;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"waiting-time estimators for relative entropy of Markov chains"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config with models and plans")->required();

    auto* validate = app.add_subcommand("validate", "check every model and plan invariant");

    auto* list = app.add_subcommand("list", "list models and plans");

    auto* exact = app.add_subcommand("exact", "deterministic oracles for a model (pair)");
    std::string model_name, model2_name, exact_out;
    bool reversed = false;
    double exact_delta = 0.1;
    exact->add_option("--model", model_name, "base model name")->required();
    exact->add_option("--model2", model2_name, "comparison model name");
    exact->add_flag("--reversed", reversed, "compare against the time reversal");
    exact->add_option("--delta", exact_delta, "discretization step for the discrete curve");
    exact->add_option("--out", exact_out, "directory for curve CSV files");

    auto* run = app.add_subcommand("run", "run a named experiment plan");
    std::string plan_name, run_out;
    bool strict = false;
    std::optional<std::uint64_t> seed, budget;
    std::optional<std::size_t> replicas, n_override;
    std::optional<double> delta_override;
    run->add_option("--plan", plan_name, "plan name from the config")->required();
    run->add_option("--seed", seed, "override the random seed");
    run->add_option("--replicas", replicas, "override the replica count");
    run->add_option("--delta", delta_override, "override the discretization step");
    run->add_option("--n", n_override, "override the block length");
    run->add_option("--budget", budget, "override the symbol budget per search");
    run->add_option("--out", run_out, "output directory");
    run->add_flag("--strict", strict, "exit 2 when |z| exceeds 3");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) return cmd_validate(config_path);
        if (list->parsed()) return cmd_list(config_path);
        if (exact->parsed())
            return cmd_exact(config_path, model_name, model2_name, reversed, exact_delta,
                             exact_out);
        if (run->parsed())
            return cmd_run(config_path, plan_name, seed, replicas, delta_override, n_override,
                           budget, run_out, strict);
    } catch (const CliError& e) {
        std::fprintf(stderr, "error: %s\n", e.message.c_str());
        return e.code;
    } catch (const validation_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 3;
    } catch (const absolute_continuity_error& e) {
        std::fprintf(stderr, "absolute continuity error: %s\n", e.what());
        return 3;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 1;
}
