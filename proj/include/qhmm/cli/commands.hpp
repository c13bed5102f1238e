#pragma once

#include "qhmm/calibrate.hpp"
#include "qhmm/cli/config.hpp"
#include "qhmm/data.hpp"
#include "qhmm/dependence/coupling.hpp"
#include "qhmm/dependence/elliptical.hpp"
#include "qhmm/dependence/rank.hpp"
#include "qhmm/dependence/sim.hpp"
#include "qhmm/dependence/vine.hpp"
#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/simulate.hpp"
#include "qhmm/validate.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qhmm::cli {

enum class Command { fit, calibrate, simulate, validate, portfolio, report };

inline Command parse_command(const std::string& s) {
    static const std::map<std::string, Command> table{{"fit", Command::fit},
                                                      {"calibrate", Command::calibrate},
                                                      {"simulate", Command::simulate},
                                                      {"validate", Command::validate},
                                                      {"portfolio", Command::portfolio},
                                                      {"report", Command::report}};
    const auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown command '" + s + "'");
    return it->second;
}

// stream tags folded into every derived seed
namespace tag {
inline constexpr std::uint64_t simulate = 1;
inline constexpr std::uint64_t calibrate = 2;
inline constexpr std::uint64_t no_jump = 3;
inline constexpr std::uint64_t baseline = 4;
inline constexpr std::uint64_t bootstrap = 5;
inline constexpr std::uint64_t sweep = 6;
inline constexpr std::uint64_t sim_residuals = 7;
inline constexpr std::uint64_t coupling = 8;
} // namespace tag

/// Files written by one command. Writes go through a temporary name and a
/// rename; rollback() deletes everything written so far.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const noexcept { return dir_; }
    const std::vector<std::filesystem::path>& written() const noexcept { return written_; }

    void write(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(dir_);
        const auto target = dir_ / name;
        auto tmp = target;
        tmp += ".partial";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot write '" + tmp.string() + "'");
            out << content;
            out.close();
            if (!out) {
                std::error_code ec;
                std::filesystem::remove(tmp, ec);
                throw DataError("write failed for '" + tmp.string() + "'");
            }
        }
        std::filesystem::rename(tmp, target);
        written_.push_back(target);
    }

    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
        written_.clear();
    }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
};

struct RunOptions {
    std::filesystem::path out_dir = "qhmm_out";
    std::vector<std::string> tickers;  ///< subset; empty means all configured
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string num(double v) { return fmt("%.17g", v); }

inline RunConfig apply_options(RunConfig cfg, const RunOptions& opt) {
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.workers) cfg.workers = *opt.workers;
    if (!opt.tickers.empty()) {
        for (const auto& t : opt.tickers)
            if (std::find(cfg.tickers.begin(), cfg.tickers.end(), t) == cfg.tickers.end())
                throw ConfigError("--ticker '" + t + "' is not configured");
        std::vector<std::string> keep;
        for (const auto& t : cfg.tickers)
            if (std::find(opt.tickers.begin(), opt.tickers.end(), t) != opt.tickers.end()) keep.push_back(t);
        cfg.tickers = keep;
        if (!cfg.market.empty() && std::find(keep.begin(), keep.end(), cfg.market) == keep.end()) cfg.market.clear();
    }
    cfg.validate();
    return cfg;
}

// Streams key on the ticker name (FNV-1a) so --ticker subsets reproduce the
// full run's per-ticker output.
inline std::uint64_t ticker_key(const std::string& t) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : t) h = (h ^ c) * 1099511628211ULL;
    return h;
}

inline PriceSeries load_prices(const RunConfig& cfg, const std::string& ticker) {
    const auto path = cfg.data_path(ticker);
    auto p = load_price_series(path.string(), ticker);
    const auto lo = cfg.start ? Date::parse(*cfg.start) : std::nullopt;
    const auto hi = cfg.end ? Date::parse(*cfg.end) : std::nullopt;
    if (lo || hi) {
        PriceSeries f;
        f.ticker = p.ticker;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if ((lo && p.dates[i] < *lo) || (hi && p.dates[i] > *hi)) continue;
            f.dates.push_back(p.dates[i]);
            f.close.push_back(p.close[i]);
        }
        p = std::move(f);
    }
    if (p.size() < 2) throw DataError("price series '" + ticker + "' has fewer than 2 rows in the selected window");
    return p;
}

inline GrowthSeries load_growth(const RunConfig& cfg, const std::string& ticker) {
    return compute_growth_rates(load_prices(cfg, ticker), cfg.r_f, cfg.delta_t);
}

/// Restrict every series to the dates present in all of them.
inline std::vector<PriceSeries> align_prices(std::vector<PriceSeries> series) {
    std::vector<Date> common = series.front().dates;
    for (std::size_t k = 1; k < series.size(); ++k) {
        std::vector<Date> next;
        std::set_intersection(common.begin(), common.end(), series[k].dates.begin(), series[k].dates.end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (common.size() < 2) throw DataError("tickers share fewer than 2 common dates");
    for (auto& s : series) {
        PriceSeries f;
        f.ticker = s.ticker;
        std::size_t c = 0;
        for (std::size_t i = 0; i < s.size() && c < common.size(); ++i) {
            if (s.dates[i] == common[c]) {
                f.dates.push_back(s.dates[i]);
                f.close.push_back(s.close[i]);
                ++c;
            }
        }
        s = std::move(f);
    }
    return series;
}

inline std::size_t horizon_for(const RunConfig& cfg, const GrowthSeries& g) {
    return cfg.horizon > 0 ? cfg.horizon : g.size();
}

inline std::uint64_t stream_seed(const RunConfig& cfg, std::uint64_t t, const std::string& ticker, std::uint64_t sub = 0) {
    return numeric::derive_seed(cfg.seed, {t, ticker_key(ticker), sub});
}

inline PathEnsemble hmm_ensemble(const RunConfig& cfg, const HmmModel& model, const GrowthSeries& g, bool jumps) {
    JumpConfig j = cfg.jump;
    if (!jumps) j.enabled = false;
    const auto seed = stream_seed(cfg, jumps ? tag::simulate : tag::no_jump, g.ticker);
    return simulate_ensemble(model, j, cfg.paths, horizon_for(cfg, g), seed, cfg.workers);
}

inline std::string ensemble_csv(const PathEnsemble& e) {
    std::ostringstream os;
    write_ensemble_csv(os, e);
    return os.str();
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Pooled histogram densities of observed and simulated values on the observed range.
inline nlohmann::json density_json(std::span<const double> observed, const PathEnsemble& ens, std::size_t bins = 60) {
    const auto [mn, mx] = std::minmax_element(observed.begin(), observed.end());
    const double lo = *mn, hi = *mx;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    auto histogram = [&](auto&& for_each) {
        std::vector<double> h(bins, 0.0);
        double total = 0.0;
        for_each([&](double v) {
            total += 1.0;
            if (v < lo || v > hi) return;
            const auto k = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
            h[k] += 1.0;
        });
        for (double& x : h) x = total > 0 ? x / (total * width) : 0.0;
        return h;
    };
    const auto obs = histogram([&](auto f) {
        for (double v : observed) f(v);
    });
    const auto sim = histogram([&](auto f) {
        for (const auto& p : ens.paths)
            for (std::size_t t = 0; t < std::min(p.growth.size(), observed.size()); ++t) f(p.growth[t]);
    });
    std::vector<double> centers(bins);
    for (std::size_t k = 0; k < bins; ++k) centers[k] = lo + (static_cast<double>(k) + 0.5) * width;
    return {{"bin_center", centers}, {"observed", obs}, {"simulated", sim}};
}

inline nlohmann::json curve_json(const AcfCurve& c) {
    return {{"n_paths", c.n_paths}, {"mean", c.mean}, {"p10", c.p10}, {"p90", c.p90},
            {"acf_mae", std::isfinite(c.mae) ? nlohmann::json(c.mae) : nlohmann::json(nullptr)}};
}

inline nlohmann::json plot_json(const MetricReport& r) {
    nlohmann::json j{{"observed_acf", r.observed_acf},
                     {"acf_all_paths", curve_json(r.acf_all)},
                     {"qq",
                      {{"probe", r.envelope.probes},
                       {"observed", r.envelope.observed},
                       {"lower", r.envelope.lower},
                       {"upper", r.envelope.upper}}}};
    if (r.jumps) j["acf_jump_paths"] = curve_json(r.jumps->jump_paths);
    return j;
}

inline std::string per_path_csv(const MetricReport& r) {
    std::ostringstream os;
    write_per_path_csv(os, r);
    return os.str();
}

inline const std::vector<std::pair<const char*, const char*>>& table2_rows() {
    static const std::vector<std::pair<const char*, const char*>> rows{
        {"ks_pass_rate", "KS pass rate (%)"},       {"ad_pass_rate", "AD pass rate (%)"},
        {"excess_kurtosis_simulated", "Excess kurtosis"}, {"acf_mae", "ACF-MAE"},
        {"coverage_pct", "Quantile coverage (%)"},  {"wasserstein1", "Wasserstein-1"},
        {"hellinger", "Hellinger"}};
    return rows;
}

inline double json_number(const nlohmann::json& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

// --- commands -----------------------------------------------------------------

inline void run_fit(const RunConfig& cfg, ArtifactSet& art) {
    for (const auto& t : cfg.tickers) {
        const auto prices = detail::load_prices(cfg, t);
        const auto g = compute_growth_rates(prices, cfg.r_f, cfg.delta_t);
        const auto model = fit_model(g, cfg.n_states, cfg.nu);
        art.write_json("model_" + t + ".json", model);
        nlohmann::json stats = descriptive_stats(g);
        stats["ticker"] = t;
        stats["n"] = g.size();
        stats["first_date"] = prices.dates.front().to_string();
        stats["last_date"] = prices.dates.back().to_string();
        art.write_json("stats_" + t + ".json", stats);
    }
}

inline void run_calibrate(const RunConfig& cfg, ArtifactSet& art) {
    for (const auto& t : cfg.tickers) {
        const auto g = detail::load_growth(cfg, t);
        const auto model = fit_model(g, cfg.n_states, cfg.nu);
        const auto r = grid_search(model, g, cfg.grid, detail::stream_seed(cfg, tag::calibrate, t), cfg.jump, cfg.workers);
        std::ostringstream os;
        write_grid_csv(os, r);
        art.write("grid_" + t + ".csv", os.str());
        art.write_json("best_" + t + ".json", best_point_json(r));
    }
}

inline void run_simulate(const RunConfig& cfg, ArtifactSet& art) {
    for (const auto& t : cfg.tickers) {
        const auto g = detail::load_growth(cfg, t);
        const auto model = fit_model(g, cfg.n_states, cfg.nu);
        const auto ens = detail::hmm_ensemble(cfg, model, g, cfg.jump.enabled);
        art.write("ensemble_" + t + ".csv", detail::ensemble_csv(ens));
        auto manifest = ensemble_manifest(ens, to_json(cfg));
        manifest["created_utc"] = detail::utc_timestamp();
        art.write_json("manifest_" + t + ".json", manifest);
    }
}

inline PathEnsemble generator_ensemble(const RunConfig& cfg, const std::string& name, const HmmModel& model,
                                       const GrowthSeries& g) {
    if (name == "hmm") return detail::hmm_ensemble(cfg, model, g, cfg.jump.enabled);
    if (name == "hmm_nj") return detail::hmm_ensemble(cfg, model, g, false);
    const auto kind = parse_baseline_kind(name);
    return baseline_generate(kind, g, cfg.paths, detail::horizon_for(cfg, g),
                             detail::stream_seed(cfg, tag::baseline, g.ticker, static_cast<std::uint64_t>(kind)),
                             cfg.workers);
}

inline void run_validate(const RunConfig& cfg, ArtifactSet& art) {
    for (const auto& t : cfg.tickers) {
        const auto g = detail::load_growth(cfg, t);
        const auto model = fit_model(g, cfg.n_states, cfg.nu);
        EvaluateOptions opt;
        opt.alpha = cfg.alpha;
        opt.bootstrap_b = cfg.bootstrap_b;
        opt.bootstrap_seed = detail::stream_seed(cfg, tag::bootstrap, t);
        opt.max_lag = cfg.acf_max_lag;
        opt.workers = cfg.workers;

        nlohmann::json doc{{"ticker", t}, {"n_observed", g.size()}, {"observed", descriptive_stats(g)},
                           {"generators", nlohmann::json::object()}};
        std::ostringstream table;
        table << "metric";
        for (const auto& name : cfg.generators) table << "," << name << "," << name << "_se";
        table << "\n";
        std::map<std::string, nlohmann::json> reports;
        for (const auto& name : cfg.generators) {
            const auto ens = generator_ensemble(cfg, name, model, g);
            const auto rep = evaluate_ensemble(g, ens, opt);
            auto j = to_json(rep);
            j["plot"] = detail::plot_json(rep);
            j["plot"]["density"] = detail::density_json(g.values, ens);
            reports[name] = j;
            art.write("per_path_" + t + "_" + name + ".csv", detail::per_path_csv(rep));
        }
        for (const auto& [key, label] : detail::table2_rows()) {
            table << key;
            for (const auto& name : cfg.generators) {
                const auto& e = reports[name].at(key);
                table << "," << detail::num(detail::json_number(e.at("value"))) << ","
                      << detail::num(detail::json_number(e.at("se")));
            }
            table << "\n";
        }
        for (auto& [name, j] : reports) doc["generators"][name] = std::move(j);

        if (!cfg.state_sweep.empty()) {
            const auto rows = sweep_state_resolution(g, cfg.state_sweep, cfg.nu, cfg.jump, cfg.paths,
                                                     detail::stream_seed(cfg, tag::sweep, t), opt);
            std::ostringstream os;
            os << "n_states,min_support,unvisited_states,ks_pass_no_jump,ad_pass_no_jump,ks_pass_jump,ad_pass_jump\n";
            for (const auto& r : rows)
                os << r.n_states << "," << r.min_support << "," << r.unvisited_states << ","
                   << detail::num(r.ks_pass_no_jump) << "," << detail::num(r.ad_pass_no_jump) << ","
                   << detail::num(r.ks_pass_jump) << "," << detail::num(r.ad_pass_jump) << "\n";
            art.write("sweep_" + t + ".csv", os.str());
        }
        art.write("table2_" + t + ".csv", table.str());
        art.write_json("metrics_" + t + ".json", doc);
    }
}

inline void run_portfolio(const RunConfig& cfg, ArtifactSet& art) {
    if (cfg.tickers.size() < 2) throw ConfigError("portfolio needs at least 2 tickers");
    std::vector<PriceSeries> prices;
    for (const auto& t : cfg.tickers) prices.push_back(detail::load_prices(cfg, t));
    prices = detail::align_prices(std::move(prices));
    std::vector<GrowthSeries> growth;
    for (const auto& p : prices) growth.push_back(compute_growth_rates(p, cfg.r_f, cfg.delta_t));
    const std::size_t n = growth.front().size(), d = growth.size();
    Eigen::MatrixXd observed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t t = 0; t < n; ++t) observed(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) = growth[a].values[t];

    std::vector<PathEnsemble> marginals;
    for (const auto& g : growth) {
        const auto model = fit_model(g, cfg.n_states, cfg.nu);
        marginals.push_back(detail::hmm_ensemble(cfg, model, g, cfg.jump.enabled));
    }

    nlohmann::json model_doc{{"dependence", to_string(cfg.dependence)}, {"tickers", cfg.tickers},
                             {"common_dates", n + 1}, {"first_date", prices.front().dates.front().to_string()},
                             {"last_date", prices.front().dates.back().to_string()}};
    std::vector<PathEnsemble> coupled;
    switch (cfg.dependence) {
    case DependenceKind::none: coupled = marginals; break;
    case DependenceKind::sim: {
        const auto m = static_cast<std::size_t>(
            std::find(cfg.tickers.begin(), cfg.tickers.end(), cfg.market_ticker()) - cfg.tickers.begin());
        nlohmann::json fits = nlohmann::json::array();
        for (std::size_t a = 0; a < d; ++a) {
            if (a == m) {
                coupled.push_back(marginals[m]);
                continue;
            }
            const auto fit = dependence::fit_sim(growth[a], growth[m]);
            fits.push_back(dependence::to_json(fit));
            coupled.push_back(dependence::simulate_sim(fit, marginals[m],
                                                       detail::stream_seed(cfg, tag::sim_residuals, cfg.tickers[a]),
                                                       cfg.workers));
        }
        model_doc["market"] = cfg.market_ticker();
        model_doc["sim"] = fits;
        break;
    }
    case DependenceKind::gaussian:
    case DependenceKind::student_t:
    case DependenceKind::vine: {
        const Eigen::MatrixXd u = dependence::pit_transform(observed);
        dependence::DependenceModel model;
        if (cfg.dependence == DependenceKind::gaussian)
            model = dependence::fit_gaussian_copula(u);
        else if (cfg.dependence == DependenceKind::student_t)
            model = dependence::fit_t_copula(u);
        else
            model = dependence::fit_cvine(u);
        model_doc["copula"] = dependence::to_json(model);
        coupled = dependence::couple_ensembles(model, marginals, numeric::derive_seed(cfg.seed, {tag::coupling}),
                                               cfg.workers);
        break;
    }
    }
    const auto report = dependence::correlation_metrics(observed, coupled, cfg.tickers, cfg.alpha, 200,
                                                        numeric::derive_seed(cfg.seed, {tag::bootstrap}), cfg.workers);
    for (std::size_t a = 0; a < d; ++a) art.write("coupled_" + cfg.tickers[a] + ".csv", detail::ensemble_csv(coupled[a]));
    art.write_json("dependence_model.json", model_doc);
    art.write_json("dependence_report.json", dependence::to_json(report));

    std::ostringstream t3;
    t3 << "method,frobenius_error,frobenius_se,pairwise_corr_mae";
    for (const auto& t : cfg.tickers) t3 << ",ks_pass_" << t << ",ks_pass_" << t << "_se";
    t3 << "\n" << to_string(cfg.dependence) << "," << detail::num(report.frobenius_error) << ","
       << detail::num(report.frobenius_se) << "," << detail::num(report.pairwise_corr_mae);
    for (const auto& t : cfg.tickers) {
        const auto& e = report.per_asset_ks_pass.at(t);
        t3 << "," << detail::num(e.value) << "," << detail::num(e.se);
    }
    t3 << "\n";
    art.write("table3.csv", t3.str());
}

// --- report -------------------------------------------------------------------

namespace detail {

inline std::vector<std::filesystem::path> artifacts_matching(const std::filesystem::path& dir, const std::string& prefix,
                                                             const std::string& suffix) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.size() > prefix.size() + suffix.size() && name.starts_with(prefix) && name.ends_with(suffix))
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string ticker_of(const std::filesystem::path& p, const std::string& prefix, const std::string& suffix) {
    const auto name = p.filename().string();
    return name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot read artifact '" + p.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("artifact '" + p.string() + "' is not valid JSON: " + e.what());
    }
}

inline std::string cell(const nlohmann::json& j, const char* spec = "%.4g") {
    return j.is_number() ? fmt(spec, j.get<double>()) : std::string("n/a");
}

inline std::string estimate_cell(const nlohmann::json& e, const char* spec = "%.4g") {
    return cell(e.at("value"), spec) + " (" + cell(e.at("se"), spec) + ")";
}

} // namespace detail

/// Consolidated markdown summary plus plot-ready CSVs built from whatever
/// artifacts exist in `dir`. Sections without inputs are skipped with a notice.
inline void emit_report(const std::filesystem::path& dir, ArtifactSet& art) {
    const auto stats = detail::artifacts_matching(dir, "stats_", ".json");
    const auto bests = detail::artifacts_matching(dir, "best_", ".json");
    const auto manifests = detail::artifacts_matching(dir, "manifest_", ".json");
    const auto metrics = detail::artifacts_matching(dir, "metrics_", ".json");
    const bool has_dependence = std::filesystem::exists(dir / "dependence_report.json");
    if (stats.empty() && bests.empty() && manifests.empty() && metrics.empty() && !has_dependence)
        throw DataError("report: no artifacts found in '" + dir.string() + "'");

    std::ostringstream md;
    md << "# qhmm report\n\n";

    md << "## Descriptive statistics\n\n";
    if (stats.empty()) {
        md << "_Section skipped: no stats_*.json artifacts (run `fit`)._\n\n";
    } else {
        std::ostringstream csv;
        csv << "ticker,n,first_date,last_date,mean_pct,std_pct,skewness,excess_kurtosis,jb_stat,jb_p,lb_raw_stat,"
               "lb_raw_p,lb_abs_stat,lb_abs_p\n";
        md << "| ticker | n | mean (%) | std (%) | skew | excess kurt | JB p | LB(|G|) p |\n|---|---|---|---|---|---|---|---|\n";
        for (const auto& p : stats) {
            const auto j = detail::read_json(p);
            auto test = [&](const char* k, const char* f) {
                return j.contains(k) && j.at(k).is_object() ? detail::json_number(j.at(k).at(f))
                                                            : std::numeric_limits<double>::quiet_NaN();
            };
            csv << j.at("ticker").get<std::string>() << "," << j.at("n").get<std::size_t>() << ","
                << j.at("first_date").get<std::string>() << "," << j.at("last_date").get<std::string>() << ","
                << detail::num(detail::json_number(j.at("mean_pct"))) << ","
                << detail::num(detail::json_number(j.at("std_pct"))) << ","
                << detail::num(detail::json_number(j.at("skewness"))) << ","
                << detail::num(detail::json_number(j.at("excess_kurtosis"))) << ","
                << detail::num(test("jb", "statistic")) << "," << detail::num(test("jb", "p_value"))
                << "," << detail::num(test("lb_raw", "statistic")) << ","
                << detail::num(test("lb_raw", "p_value")) << ","
                << detail::num(test("lb_abs", "statistic")) << ","
                << detail::num(test("lb_abs", "p_value")) << "\n";
            md << "| " << j.at("ticker").get<std::string>() << " | " << j.at("n").get<std::size_t>() << " | "
               << detail::cell(j.at("mean_pct")) << " | " << detail::cell(j.at("std_pct")) << " | "
               << detail::cell(j.at("skewness")) << " | " << detail::cell(j.at("excess_kurtosis")) << " | "
               << detail::fmt("%.3g", test("jb", "p_value")) << " | "
               << detail::fmt("%.3g", test("lb_abs", "p_value")) << " |\n";
        }
        md << "\n";
        art.write("table1.csv", csv.str());
    }

    md << "## Calibration\n\n";
    if (bests.empty()) {
        md << "_Section skipped: no best_*.json artifacts (run `calibrate`)._\n\n";
    } else {
        auto boundary = [](const nlohmann::json& j, const std::string& axis) -> std::string {
            const auto& b = j.at("boundary");
            if (b.value(axis + "_lower", false)) return "lower";
            if (b.value(axis + "_upper", false)) return "upper";
            return "no";
        };
        md << "| ticker | epsilon* | lambda* | J | epsilon on boundary | lambda on boundary |\n|---|---|---|---|---|---|\n";
        for (const auto& p : bests) {
            const auto t = detail::ticker_of(p, "best_", ".json");
            const auto j = detail::read_json(p);
            md << "| " << t << " | " << detail::cell(j.at("epsilon")) << " | " << detail::cell(j.at("lambda")) << " | "
               << detail::cell(j.at("J")) << " | " << boundary(j, "epsilon") << " | " << boundary(j, "lambda") << " |\n";
            if (!std::filesystem::exists(dir / ("grid_" + t + ".csv")))
                md << "\n_Surface for " << t << " skipped: grid_" << t << ".csv missing._\n";
        }
        md << "\nObjective surfaces: `grid_<ticker>.csv` (columns epsilon, lambda, J).\n\n";
    }

    md << "## Simulation\n\n";
    if (manifests.empty()) {
        md << "_Section skipped: no manifest_*.json artifacts (run `simulate`)._\n\n";
    } else {
        md << "| ticker | paths | horizon | jump paths (%) | episodes | forced steps |\n|---|---|---|---|---|---|\n";
        for (const auto& p : manifests) {
            const auto j = detail::read_json(p);
            md << "| " << detail::ticker_of(p, "manifest_", ".json") << " | " << j.value("n_paths", 0) << " | "
               << j.value("horizon", 0) << " | " << detail::fmt("%.1f", 100.0 * j.value("jump_fraction", 0.0)) << " | "
               << j.value("jump_episodes", 0) << " | " << j.value("forced_steps", 0) << " |\n";
        }
        md << "\n";
    }

    md << "## Validation\n\n";
    if (metrics.empty()) {
        md << "_Section skipped: no metrics_*.json artifacts (run `validate`)._\n\n";
    } else {
        for (const auto& p : metrics) {
            const auto t = detail::ticker_of(p, "metrics_", ".json");
            const auto j = detail::read_json(p);
            const auto& gens = j.at("generators");
            md << "### " << t << "\n\n| metric |";
            for (const auto& [name, _] : gens.items()) md << " " << name << " |";
            md << "\n|---|";
            for (std::size_t k = 0; k < gens.size(); ++k) md << "---|";
            md << "\n";
            for (const auto& [key, label] : detail::table2_rows()) {
                md << "| " << label << " |";
                for (const auto& [name, g] : gens.items()) md << " " << detail::estimate_cell(g.at(key)) << " |";
                md << "\n";
            }
            md << "\nObserved excess kurtosis: "
               << detail::cell(j.at("observed").at("excess_kurtosis")) << "\n\n";

            // ACF curves: observed plus each generator's all-paths mean
            std::ostringstream acf;
            const auto obs_acf = gens.begin()->at("plot").at("observed_acf").get<std::vector<double>>();
            acf << "lag,observed";
            for (const auto& [name, _] : gens.items()) acf << "," << name;
            acf << "\n";
            for (std::size_t k = 0; k < obs_acf.size(); ++k) {
                acf << k + 1 << "," << detail::num(obs_acf[k]);
                for (const auto& [name, g] : gens.items()) {
                    const auto& mean = g.at("plot").at("acf_all_paths").at("mean");
                    acf << "," << (k < mean.size() ? detail::num(mean[k].get<double>()) : std::string());
                }
                acf << "\n";
            }
            art.write("acf_" + t + ".csv", acf.str());

            // jump-conditioned curves for generators with states
            bool any_jump = false;
            for (const auto& [name, g] : gens.items()) {
                if (!g.at("plot").contains("acf_jump_paths")) continue;
                const auto& all = g.at("plot").at("acf_all_paths");
                const auto& jp = g.at("plot").at("acf_jump_paths");
                if (jp.at("mean").empty()) {
                    md << "_Jump-conditioned ACF for " << name << " skipped: no jump-containing paths._\n\n";
                    continue;
                }
                any_jump = true;
                std::ostringstream os;
                os << "lag,observed,all_mean,all_p10,all_p90,jump_mean,jump_p10,jump_p90\n";
                for (std::size_t k = 0; k < obs_acf.size(); ++k)
                    os << k + 1 << "," << detail::num(obs_acf[k]) << "," << detail::num(all.at("mean")[k].get<double>())
                       << "," << detail::num(all.at("p10")[k].get<double>()) << ","
                       << detail::num(all.at("p90")[k].get<double>()) << ","
                       << detail::num(jp.at("mean")[k].get<double>()) << ","
                       << detail::num(jp.at("p10")[k].get<double>()) << ","
                       << detail::num(jp.at("p90")[k].get<double>()) << "\n";
                art.write("acf_jump_" + t + "_" + name + ".csv", os.str());
                md << "Jump-conditioned ACF-MAE (" << name << "): all paths " << detail::cell(all.at("acf_mae"))
                   << " (" << all.at("n_paths").get<std::size_t>() << " paths), jump paths "
                   << detail::cell(jp.at("acf_mae")) << " (" << jp.at("n_paths").get<std::size_t>() << " paths)\n\n";
            }
            if (!any_jump) md << "_Jump-conditioned ACF section skipped: no generator with jump paths._\n\n";

            std::ostringstream qq;
            qq << "generator,probe,observed,lower,upper\n";
            std::ostringstream dens;
            dens << "generator,bin_center,observed_density,simulated_density\n";
            for (const auto& [name, g] : gens.items()) {
                const auto& q = g.at("plot").at("qq");
                for (std::size_t k = 0; k < q.at("probe").size(); ++k)
                    qq << name << "," << detail::num(q.at("probe")[k].get<double>()) << ","
                       << detail::num(q.at("observed")[k].get<double>()) << ","
                       << detail::num(q.at("lower")[k].get<double>()) << ","
                       << detail::num(q.at("upper")[k].get<double>()) << "\n";
                const auto& h = g.at("plot").at("density");
                for (std::size_t k = 0; k < h.at("bin_center").size(); ++k)
                    dens << name << "," << detail::num(h.at("bin_center")[k].get<double>()) << ","
                         << detail::num(h.at("observed")[k].get<double>()) << ","
                         << detail::num(h.at("simulated")[k].get<double>()) << "\n";
            }
            art.write("qq_" + t + ".csv", qq.str());
            art.write("density_" + t + ".csv", dens.str());
        }
    }

    md << "## Dependence\n\n";
    if (!has_dependence) {
        md << "_Section skipped: dependence_report.json missing (run `portfolio`)._\n\n";
    } else {
        const auto j = detail::read_json(dir / "dependence_report.json");
        std::string method = "unknown";
        if (std::filesystem::exists(dir / "dependence_model.json"))
            method = detail::read_json(dir / "dependence_model.json").value("dependence", "unknown");
        md << "| method | Frobenius error | pairwise corr MAE |";
        for (const auto& t : j.at("tickers")) md << " KS pass " << t.get<std::string>() << " (%) |";
        md << "\n|---|---|---|";
        for (std::size_t k = 0; k < j.at("tickers").size(); ++k) md << "---|";
        md << "\n| " << method << " | " << detail::estimate_cell(j.at("frobenius_error"), "%.3f") << " | "
           << detail::cell(j.at("pairwise_corr_mae"), "%.3f") << " |";
        for (const auto& t : j.at("tickers"))
            md << " " << detail::estimate_cell(j.at("per_asset_ks_pass_pct").at(t.get<std::string>()), "%.1f") << " |";
        md << "\n\n";
    }
    art.write("report.md", md.str());
}

/// Execute one command. Artifacts from a failed command are removed before the
/// error propagates.
inline void run_command(Command cmd, const std::optional<RunConfig>& config, const RunOptions& opt) {
    ArtifactSet art(opt.out_dir);
    try {
        if (cmd == Command::report) {
            emit_report(opt.out_dir, art);
            return;
        }
        if (!config) throw ConfigError("command requires --config");
        const auto cfg = detail::apply_options(*config, opt);
        switch (cmd) {
        case Command::fit: run_fit(cfg, art); break;
        case Command::calibrate: run_calibrate(cfg, art); break;
        case Command::simulate: run_simulate(cfg, art); break;
        case Command::validate: run_validate(cfg, art); break;
        case Command::portfolio: run_portfolio(cfg, art); break;
        case Command::report: break;
        }
    } catch (...) {
        art.rollback();
        throw;
    }
}

} // namespace qhmm::cli
