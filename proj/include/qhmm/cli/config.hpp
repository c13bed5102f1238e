#pragma once

#include "qhmm/calibrate.hpp"
#include "qhmm/error.hpp"
#include "qhmm/simulate.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qhmm::cli {

enum class DependenceKind { none, sim, gaussian, student_t, vine };

inline std::string to_string(DependenceKind k) {
    switch (k) {
    case DependenceKind::none: return "none";
    case DependenceKind::sim: return "sim";
    case DependenceKind::gaussian: return "gaussian";
    case DependenceKind::student_t: return "student_t";
    case DependenceKind::vine: return "vine";
    }
    return "none";
}

inline DependenceKind parse_dependence_kind(const std::string& s) {
    for (auto k : {DependenceKind::none, DependenceKind::sim, DependenceKind::gaussian, DependenceKind::student_t,
                   DependenceKind::vine})
        if (to_string(k) == s) return k;
    throw ConfigError("dependence must be one of sim|gaussian|student_t|vine|none, got '" + s + "'");
}

struct RunConfig {
    std::vector<std::string> tickers;
    std::map<std::string, std::string> data;  ///< ticker -> price CSV path
    std::string market;                       ///< SIM factor ticker; first ticker when empty
    std::optional<std::string> start;         ///< inclusive date window
    std::optional<std::string> end;
    double r_f = 0.0;
    double delta_t = 1.0 / 252.0;
    std::size_t n_states = 100;
    double nu = 5.0;
    JumpConfig jump;
    GridSpec grid;
    std::size_t paths = 1000;
    std::size_t horizon = 0;  ///< 0: length of the observed series
    std::uint64_t seed = 0;
    double alpha = 0.05;
    std::size_t bootstrap_b = 500;
    std::size_t acf_max_lag = 252;
    std::vector<std::string> generators{"hmm", "hmm_nj", "bootstrap", "gaussian", "laplace"};
    std::vector<std::size_t> state_sweep;  ///< optional state-resolution sweep
    DependenceKind dependence = DependenceKind::student_t;
    unsigned workers = 0;

    /// Directory the data paths are resolved against (the config file's directory).
    std::filesystem::path base_dir;

    const std::string& market_ticker() const { return market.empty() ? tickers.front() : market; }

    std::filesystem::path data_path(const std::string& ticker) const {
        const auto it = data.find(ticker);
        if (it == data.end()) throw ConfigError("no data path configured for ticker '" + ticker + "'");
        std::filesystem::path p(it->second);
        return p.is_absolute() ? p : base_dir / p;
    }

    void validate() const {
        if (tickers.empty()) throw ConfigError("tickers must list at least one ticker");
        std::set<std::string> seen;
        for (const auto& t : tickers) {
            if (t.empty()) throw ConfigError("tickers must be nonempty strings");
            if (!seen.insert(t).second) throw ConfigError("duplicate ticker '" + t + "'");
            if (!data.count(t)) throw ConfigError("no data path configured for ticker '" + t + "'");
        }
        if (!market.empty() && !seen.count(market)) throw ConfigError("market '" + market + "' is not in tickers");
        for (const auto* d : {&start, &end})
            if (*d && !Date::parse(**d)) throw ConfigError("invalid date '" + **d + "' (expected YYYY-MM-DD)");
        if (!std::isfinite(r_f)) throw ConfigError("r_f must be finite");
        if (!(delta_t > 0.0)) throw ConfigError("delta_t must be positive");
        if (n_states < 2) throw ConfigError("n_states must be >= 2");
        if (!(nu > 2.0)) throw ConfigError("nu must exceed 2 (or be \"inf\")");
        jump.validate(n_states);
        grid.validate();
        if (paths < 1) throw ConfigError("paths must be >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
        if (acf_max_lag < 1) throw ConfigError("acf_max_lag must be >= 1");
        for (const auto& g : generators)
            if (g != "hmm" && g != "hmm_nj") parse_baseline_kind(g);
        for (auto n : state_sweep)
            if (n < 2) throw ConfigError("state_sweep entries must be >= 2");
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
    }
}

inline double read_dof(const nlohmann::json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (j.is_number()) return j.get<double>();
    throw ConfigError("nu must be a number or \"inf\"");
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j,
                           {"tickers", "data", "market", "start", "end", "r_f", "delta_t", "n_states", "nu", "jump",
                            "grid", "paths", "horizon", "seed", "alpha", "bootstrap_b", "acf_max_lag", "generators",
                            "state_sweep", "dependence", "workers"},
                           "config");
    RunConfig c;
    detail::read(j, "tickers", c.tickers);
    detail::read(j, "data", c.data);
    detail::read(j, "market", c.market);
    if (j.contains("start")) c.start = j.at("start").get<std::string>();
    if (j.contains("end")) c.end = j.at("end").get<std::string>();
    detail::read(j, "r_f", c.r_f);
    detail::read(j, "delta_t", c.delta_t);
    detail::read(j, "n_states", c.n_states);
    if (j.contains("nu")) c.nu = detail::read_dof(j.at("nu"));
    if (j.contains("jump")) {
        const auto& jj = j.at("jump");
        detail::reject_unknown(jj, {"epsilon", "lambda", "n_tail", "p_neg", "enabled"}, "jump");
        detail::read(jj, "epsilon", c.jump.epsilon);
        detail::read(jj, "lambda", c.jump.lambda);
        detail::read(jj, "n_tail", c.jump.n_tail);
        detail::read(jj, "p_neg", c.jump.p_neg);
        detail::read(jj, "enabled", c.jump.enabled);
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown(g, {"epsilons", "lambdas", "paths_per_point", "horizon", "w_k", "max_lag"}, "grid");
        detail::read(g, "epsilons", c.grid.epsilons);
        detail::read(g, "lambdas", c.grid.lambdas);
        detail::read(g, "paths_per_point", c.grid.paths_per_point);
        detail::read(g, "horizon", c.grid.horizon);
        detail::read(g, "w_k", c.grid.w_k);
        detail::read(g, "max_lag", c.grid.max_lag);
    }
    detail::read(j, "paths", c.paths);
    detail::read(j, "horizon", c.horizon);
    detail::read(j, "seed", c.seed);
    detail::read(j, "alpha", c.alpha);
    detail::read(j, "bootstrap_b", c.bootstrap_b);
    detail::read(j, "acf_max_lag", c.acf_max_lag);
    detail::read(j, "generators", c.generators);
    detail::read(j, "state_sweep", c.state_sweep);
    if (j.contains("dependence")) c.dependence = parse_dependence_kind(j.at("dependence").get<std::string>());
    detail::read(j, "workers", c.workers);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j{{"tickers", c.tickers},
                     {"data", c.data},
                     {"market", c.market},
                     {"r_f", c.r_f},
                     {"delta_t", c.delta_t},
                     {"n_states", c.n_states},
                     {"nu", std::isinf(c.nu) ? nlohmann::json("inf") : nlohmann::json(c.nu)},
                     {"jump",
                      {{"epsilon", c.jump.epsilon},
                       {"lambda", c.jump.lambda},
                       {"n_tail", c.jump.n_tail},
                       {"p_neg", c.jump.p_neg},
                       {"enabled", c.jump.enabled}}},
                     {"grid",
                      {{"epsilons", c.grid.epsilons},
                       {"lambdas", c.grid.lambdas},
                       {"paths_per_point", c.grid.paths_per_point},
                       {"horizon", c.grid.horizon},
                       {"w_k", c.grid.w_k},
                       {"max_lag", c.grid.max_lag}}},
                     {"paths", c.paths},
                     {"horizon", c.horizon},
                     {"seed", c.seed},
                     {"alpha", c.alpha},
                     {"bootstrap_b", c.bootstrap_b},
                     {"acf_max_lag", c.acf_max_lag},
                     {"generators", c.generators},
                     {"state_sweep", c.state_sweep},
                     {"dependence", to_string(c.dependence)},
                     {"workers", c.workers}};
    if (c.start) j["start"] = *c.start;
    if (c.end) j["end"] = *c.end;
    return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    RunConfig c;
    try {
        c = config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    c.base_dir = path.parent_path();
    return c;
}

} // namespace qhmm::cli
