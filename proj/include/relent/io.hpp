#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relent/errors.hpp"
#include "relent/estimators.hpp"
#include "relent/model.hpp"
#include "relent/scgf.hpp"
#include "relent/trajectory.hpp"

// File formats: JSON for models, plans and run summaries; CSV for bulk data
// (header row, RFC 4180 quoting). Writers are deterministic: doubles are
// printed with round-trip precision and map-like data keeps insertion order.

namespace relent {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') { ++line; col = 1; }
        else ++col;
    }
    return {line, col};
}

} // namespace detail

/// Parses JSON, rephrasing nlohmann's byte offsets as line/column positions.
inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw validation_error(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                               ": JSON parse error: " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write file: " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Schema: {"states": [...], "escape_rates": [...], "jump_matrix": [[...]]}
inline CtmcModel model_from_json(const json& j, const std::string& origin = "model") {
    if (!j.is_object()) throw validation_error(origin + ": expected a JSON object");
    for (const char* key : {"states", "escape_rates", "jump_matrix"})
        if (!j.contains(key))
            throw validation_error(origin + ": missing field '" + key + "'");
    CtmcModel m;
    for (const auto& s : j.at("states")) m.states.push_back(s.get<std::string>());
    for (const auto& c : j.at("escape_rates")) m.escape_rates.push_back(c.get<double>());
    const auto& rows = j.at("jump_matrix");
    const std::size_t n = m.states.size();
    if (rows.size() != n)
        throw validation_error(origin + ".jump_matrix: expected " + std::to_string(n) + " rows");
    m.jump = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n)
            throw validation_error(origin + ".jump_matrix[" + std::to_string(i) +
                                   "]: expected " + std::to_string(n) + " entries");
        for (std::size_t k = 0; k < n; ++k) m.jump(i, k) = rows[i][k].get<double>();
    }
    return m;
}

inline json model_to_json(const CtmcModel& m) {
    json j;
    j["states"] = m.states;
    j["escape_rates"] = m.escape_rates;
    json rows = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.size(); ++k) row.push_back(m.jump(i, k));
        rows.push_back(row);
    }
    j["jump_matrix"] = rows;
    return j;
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct PlanSpec {
    std::string model_x;
    std::string model_y; // model name or "reversed"
    std::string model_q; // shadow only, optional
    std::string gamma_file; // shadow only, optional
    ExperimentPlan plan;  // models left empty until resolved
};

inline ExperimentKind kind_from_string(const std::string& s, const std::string& origin) {
    if (s == "lln") return ExperimentKind::lln;
    if (s == "lln_schedule") return ExperimentKind::lln_schedule;
    if (s == "clt") return ExperimentKind::clt;
    if (s == "ldp_empirical") return ExperimentKind::ldp_empirical;
    if (s == "expolaw") return ExperimentKind::expolaw;
    if (s == "shadow") return ExperimentKind::shadow;
    if (s == "naive_return") return ExperimentKind::naive_return;
    throw validation_error(origin + ": unknown experiment kind '" + s + "'");
}

inline PlanSpec plan_spec_from_json(const json& j, const std::string& origin = "plan") {
    if (!j.is_object()) throw validation_error(origin + ": expected a JSON object");
    PlanSpec spec;
    ExperimentPlan& p = spec.plan;
    if (!j.contains("kind")) throw validation_error(origin + ": missing field 'kind'");
    p.kind = kind_from_string(j.at("kind").get<std::string>(), origin);
    if (!j.contains("model_x")) throw validation_error(origin + ": missing field 'model_x'");
    spec.model_x = j.at("model_x").get<std::string>();
    spec.model_y = j.value("model_y", std::string("reversed"));
    spec.model_q = j.value("model_q", std::string());
    spec.gamma_file = j.value("gamma_file", std::string());

    p.delta = j.value("delta", 0.1);
    p.n = j.value("n", std::size_t{32});
    p.replicas = j.value("replicas", std::size_t{200});
    p.budget = j.value("budget", std::uint64_t{100000000});
    p.seed = j.value("seed", std::uint64_t{0});
    p.threads = j.value("threads", 0u);
    p.epsilon = j.value("epsilon", 0.1);
    if (j.contains("schedule")) {
        p.schedule.a = j.at("schedule").value("a", 1.0);
        p.schedule.b = j.at("schedule").value("b", 1.0 / 3.0);
    }
    if (j.contains("n_grid")) p.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    if (j.contains("p_grid")) p.p_grid = j.at("p_grid").get<std::vector<double>>();
    if (j.contains("pattern_lengths"))
        p.pattern_lengths = j.at("pattern_lengths").get<std::vector<std::size_t>>();
    p.patterns_per_length = j.value("patterns_per_length", std::size_t{2});
    p.replicas_per_pattern = j.value("replicas_per_pattern", std::size_t{2000});
    if (j.contains("delta_grid")) p.delta_grid = j.at("delta_grid").get<std::vector<double>>();
    if (j.contains("n_per_delta"))
        p.n_per_delta = j.at("n_per_delta").get<std::vector<std::size_t>>();
    if (j.contains("clt_statistic")) {
        const std::string s = j.at("clt_statistic").get<std::string>();
        if (s == "waiting") p.clt_statistic = CltStatistic::waiting;
        else if (s == "loglik") p.clt_statistic = CltStatistic::loglik;
        else throw validation_error(origin + ": unknown clt_statistic '" + s + "'");
    }
    if (p.kind == ExperimentKind::shadow) {
        if (!spec.gamma_file.empty()) p.gamma_source = ShadowGammaSource::fixed;
        else p.gamma_source = ShadowGammaSource::from_model_q;
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Config: named models + named plans
// ---------------------------------------------------------------------------

struct Config {
    std::map<std::string, CtmcModel> models;
    std::vector<std::pair<std::string, PlanSpec>> plans; // insertion order
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

inline Config config_from_json(const json& j, const std::string& origin = "config") {
    Config cfg;
    if (!j.is_object()) throw validation_error(origin + ": expected a JSON object");
    if (j.contains("models"))
        for (const auto& [name, mj] : j.at("models").items())
            cfg.models[name] = model_from_json(mj, origin + ".models." + name);
    if (j.contains("plans"))
        for (const auto& [name, pj] : j.at("plans").items()) {
            PlanSpec spec = plan_spec_from_json(pj, origin + ".plans." + name);
            spec.plan.name = name;
            cfg.plans.emplace_back(name, std::move(spec));
        }
    cfg.output_dir = j.value("output_dir", std::string("."));
    if (j.contains("seed")) {
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.seed_given = true;
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    return config_from_json(parse_json(read_file(path), path), path);
}

/// Fills in the model objects a plan refers to; "reversed" builds the time
/// reversal of model_x.
inline ExperimentPlan resolve_plan(const Config& cfg, const PlanSpec& spec) {
    ExperimentPlan plan = spec.plan;
    auto lookup = [&](const std::string& name, const std::string& what) -> const CtmcModel& {
        auto it = cfg.models.find(name);
        if (it == cfg.models.end())
            throw validation_error("plan '" + plan.name + "': " + what + " references unknown model '" +
                                   name + "'");
        return it->second;
    };
    plan.model_x = lookup(spec.model_x, "model_x");
    if (spec.model_y == "reversed") {
        plan.model_y = reverse(plan.model_x);
        plan.y_is_reversal = true;
    } else {
        plan.model_y = lookup(spec.model_y, "model_y");
    }
    if (plan.kind == ExperimentKind::shadow) {
        if (plan.gamma_source == ShadowGammaSource::from_model_q) {
            const std::string qname = spec.model_q.empty() ? spec.model_x : spec.model_q;
            plan.model_q = lookup(qname, "model_q");
        }
        // gamma_file is loaded by the caller (CLI) so the io layer stays
        // independent of the current directory
    }
    return plan;
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline std::string curve_to_csv(const ScgfCurve& c) {
    std::string out = "p,value\n";
    for (std::size_t i = 0; i < c.p.size(); ++i)
        out += detail::format_double(c.p[i]) + "," + detail::format_double(c.value[i]) + "\n";
    return out;
}

inline std::string rate_function_to_csv(const RateFunction& rf) {
    std::string out = "q,I\n";
    for (std::size_t i = 0; i < rf.q.size(); ++i)
        out += detail::format_double(rf.q[i]) + "," + detail::format_double(rf.value[i]) + "\n";
    return out;
}

/// Jump events as (time, state) rows after a metadata header.
inline std::string trajectory_to_csv(const Trajectory& t, const std::vector<std::string>& labels,
                                     std::uint64_t seed) {
    std::string out = "# seed=" + std::to_string(seed) +
                      " horizon=" + detail::format_double(t.horizon) + "\n";
    out += "time,state\n";
    out += "0," + detail::csv_quote(labels[static_cast<std::size_t>(t.initial_state)]) + "\n";
    for (std::size_t k = 0; k < t.times.size(); ++k)
        out += detail::format_double(t.times[k]) + "," +
               detail::csv_quote(labels[static_cast<std::size_t>(t.states[k])]) + "\n";
    return out;
}

inline Trajectory trajectory_from_csv(const std::string& text,
                                      const std::vector<std::string>& labels,
                                      const std::string& origin = "trajectory") {
    Trajectory t;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false, first_row = true;
    auto state_index = [&](const std::string& label) -> int {
        std::string clean = label;
        if (clean.size() >= 2 && clean.front() == '"' && clean.back() == '"') {
            clean = clean.substr(1, clean.size() - 2);
            std::string unescaped;
            for (std::size_t i = 0; i < clean.size(); ++i) {
                unescaped += clean[i];
                if (clean[i] == '"' && i + 1 < clean.size() && clean[i + 1] == '"') ++i;
            }
            clean = unescaped;
        }
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == clean) return static_cast<int>(i);
        throw validation_error(origin + ": unknown state label '" + clean + "'");
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("horizon=");
            if (pos != std::string::npos) t.horizon = std::stod(line.substr(pos + 8));
            continue;
        }
        if (!header_seen) { header_seen = true; continue; } // "time,state"
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw validation_error(origin + ": malformed row '" + line + "'");
        const double time = std::stod(line.substr(0, comma));
        const int state = state_index(line.substr(comma + 1));
        if (first_row) {
            if (time != 0.0) throw validation_error(origin + ": first row must be at time 0");
            t.initial_state = state;
            first_row = false;
        } else {
            if (!t.times.empty() && time <= t.times.back())
                throw validation_error(origin + ": jump times must increase");
            t.times.push_back(time);
            t.states.push_back(state);
        }
    }
    if (first_row) throw validation_error(origin + ": no rows");
    if (t.horizon <= 0.0) t.horizon = t.times.empty() ? 1.0 : t.times.back();
    return t;
}

/// One symbol per line after a "# delta=..." header.
inline std::string discrete_path_to_csv(const DiscretePath& p,
                                        const std::vector<std::string>& labels) {
    std::string out = "# delta=" + detail::format_double(p.delta) + "\nstate\n";
    for (int s : p.symbols) out += detail::csv_quote(labels[static_cast<std::size_t>(s)]) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string report_rows_to_csv(const EstimateReport& rep) {
    std::string out;
    for (std::size_t i = 0; i < rep.columns.size(); ++i)
        out += (i ? "," : "") + detail::csv_quote(rep.columns[i]);
    out += "\n";
    for (const auto& row : rep.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out += (i ? "," : "") + detail::format_double(row[i]);
        out += "\n";
    }
    return out;
}

inline json report_summary_to_json(const EstimateReport& rep, const ExperimentPlan& plan) {
    json j;
    j["kind"] = rep.kind;
    j["estimate"] = rep.estimate;
    j["stderr"] = rep.stderror;
    j["oracle"] = rep.oracle;
    j["z"] = rep.z;
    j["censoring_rate"] = rep.censor_rate;
    j["replicas_requested"] = rep.replicas_requested;
    j["replicas_used"] = rep.replicas_used;
    j["degenerate"] = rep.degenerate;
    json params;
    params["n"] = plan.n;
    params["delta"] = plan.delta;
    params["budget"] = plan.budget;
    params["seed"] = plan.seed;
    params["replicas"] = plan.replicas;
    j["params"] = params;
    json extras = json::object();
    for (const auto& [k, v] : rep.extras) extras[k] = v;
    j["extras"] = extras;
    j["notes"] = rep.notes;
    return j;
}

} // namespace relent
