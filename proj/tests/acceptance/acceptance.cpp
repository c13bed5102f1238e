// Acceptance suite. `qhmm_acceptance <case>` runs one case; with no argument
// every case runs. Each case prints one line:
//   criterion <id>: PASS|FAIL|SKIP  <measurements>
// Exit status: 0 pass, 1 fail, 77 skip (ctest SKIP_RETURN_CODE).
//
// Cases ending in -data need the equity price files (SPY.csv, NVDA.csv,
// JNJ.csv, JPM.csv with Date and adjusted Close columns) in $QHMM_DATA_DIR and
// skip otherwise. Cases ending in -proxy run the same pipeline on seeded
// synthetic series; their lines are labelled "[proxy]".

#include "qhmm/cli/commands.hpp"
#include "qhmm/qhmm.hpp"
#include "support/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace qhmm;
namespace dep = qhmm::dependence;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances --------------------------------------------------------------

namespace tol {
// 1
constexpr std::size_t baseline_paths = 1000;
constexpr double bootstrap_ks_min = 99.0;
constexpr double bootstrap_coverage = 100.0;
constexpr double gaussian_ks_max = 5.0;
constexpr double baseline_seconds = 120.0;
// 2
constexpr std::size_t kurtosis_draws = 1'000'000;
constexpr double t5_kurtosis = 6.0, t5_kurtosis_tol = 0.5;
constexpr double normal_kurtosis_tol = 0.1;
// 3
constexpr std::size_t partition_draws = 100'000;
constexpr double partition_freq = 0.01, partition_freq_tol = 0.003;
// 4
constexpr double stationary_residual = 1e-8;
// 5
constexpr std::size_t grid_paths_per_point = 50;
constexpr double grid_seconds = 1800.0;
// 6
constexpr double jump_fraction = 0.24, jump_fraction_tol = 0.04;
// 7
constexpr double nj_ks_min = 97.0;
constexpr double nj_kurtosis_lo = 7.6, nj_kurtosis_hi = 8.6, observed_kurtosis_ref = 7.715;
// 8
constexpr double iid_acf_identity_tol = 1e-3;
// 9
constexpr double tau_inverse_tol = 1e-8, frank_tau_inverse_tol = 1e-6;
constexpr double h_inverse_tol = 1e-8;
constexpr double tail_reference = 0.18, tail_tol = 0.005;
// 10
constexpr std::size_t recovery_n = 10'000, recovery_d = 4;
constexpr double recovery_rho = 0.6, recovery_nu = 5.0, sigma_tol = 0.03;
constexpr std::size_t aic_trials = 100, aic_trial_n = 1000;
constexpr double aic_rate_min = 0.95;
// 11
constexpr double copula_ks_min = 90.0, corr_mae_max = 0.06, sim_jpm_ks_max = 50.0;
// shared
constexpr std::size_t reference_paths = 1000;
constexpr std::size_t reference_horizon = 2766;
constexpr std::size_t reference_states = 100;
}  // namespace tol

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }
Outcome skip(std::string why) { return {Status::skip, std::move(why)}; }

std::string f(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<fs::path> data_dir() {
    const char* d = std::getenv("QHMM_DATA_DIR");
    if (!d || !*d) return std::nullopt;
    return fs::path(d);
}

std::optional<GrowthSeries> load_data_series(const std::string& ticker) {
    const auto dir = data_dir();
    if (!dir || !fs::exists(*dir / (ticker + ".csv"))) return std::nullopt;
    return compute_growth_rates(load_price_series((*dir / (ticker + ".csv")).string(), ticker), 0.0);
}

GrowthSeries proxy_series(std::uint64_t seed = 2766) {
    return synthetic::as_series(synthetic::garch_growth(tol::reference_horizon, seed), "PROXY");
}

EvaluateOptions fast_eval() {
    EvaluateOptions o;
    o.bootstrap_b = 0;
    return o;
}

JumpConfig reference_jumps() {
    JumpConfig j;
    j.epsilon = 1e-4;
    j.lambda = 100;
    return j;
}

// --- 1 ----------------------------------------------------------------------------

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto spy = load_data_series("SPY");
    const auto train = spy ? *spy : proxy_series();
    const auto boot = baseline_generate(BaselineKind::bootstrap, train, tol::baseline_paths, train.size(), 1);
    const auto rb = evaluate_ensemble(train, boot, fast_eval());

    const auto heavy = synthetic::as_series(synthetic::laplace_t_mixture(tol::reference_horizon, 5), "MIX");
    const auto gauss = baseline_generate(BaselineKind::gaussian, heavy, tol::baseline_paths, heavy.size(), 2);
    const auto rg = evaluate_ensemble(heavy, gauss, fast_eval());
    const double secs = seconds_since(t0);

    const bool ok = rb.ks_pass_rate.value >= tol::bootstrap_ks_min && rb.coverage_pct.value >= tol::bootstrap_coverage &&
                    rg.ks_pass_rate.value <= tol::gaussian_ks_max && secs < tol::baseline_seconds;
    return verdict(ok, std::string("training=") + (spy ? "SPY" : "synthetic GARCH") +
                           " bootstrap KS pass=" + f("%.1f%%", rb.ks_pass_rate.value) +
                           " coverage=" + f("%.1f%%", rb.coverage_pct.value) +
                           "; gaussian vs Laplace/t mixture KS pass=" + f("%.1f%%", rg.ks_pass_rate.value) +
                           "; runtime=" + f("%.1fs", secs));
}

// --- 2 ----------------------------------------------------------------------------

HmmModel one_state_model(double nu) {
    HmmModel m;
    m.ticker = "ONE";
    m.partition.n_states = 1;
    m.partition.boundaries = {-1.0, 1.0};
    m.transitions.n_states = 1;
    m.transitions.rows = {{1.0}};
    m.transitions.counts = {{1}};
    m.emissions.mu = {0.0};
    m.emissions.sigma = {1.0};
    m.emissions.nu = nu;
    m.emissions.support_count = {2};
    m.stationary = {1.0};
    return m;
}

Outcome criterion2() {
    JumpConfig off;
    off.enabled = false;
    const auto t5 = simulate_ensemble(one_state_model(5.0), off, 1, tol::kurtosis_draws, 2);
    const auto gn = simulate_ensemble(one_state_model(std::numeric_limits<double>::infinity()), off, 1,
                                      tol::kurtosis_draws, 2);
    const double k5 = numeric::excess_kurtosis(t5.paths[0].growth);
    const double kn = numeric::excess_kurtosis(gn.paths[0].growth);
    const bool ok = std::abs(k5 - tol::t5_kurtosis) <= tol::t5_kurtosis_tol && std::abs(kn) <= tol::normal_kurtosis_tol;
    return verdict(ok, "nu=5 excess kurtosis=" + f("%.3f", k5) + " (target 6.0 +/- 0.5); nu=inf=" + f("%.4f", kn) +
                           " (target 0 +/- 0.1)");
}

// --- 3 ----------------------------------------------------------------------------

Outcome criterion3() {
    auto rng = numeric::make_stream(3, {0});
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> x(tol::partition_draws);
    for (auto& v : x) v = 0.02 + 0.5 * (ex(rng) - ex(rng));  // Laplace(0.02, 0.5)
    const auto part = build_partition(fit_laplace_mle(x), tol::reference_states);
    std::vector<std::size_t> count(tol::reference_states, 0);
    for (auto s : encode_states(x, part)) ++count[s];
    double worst = 0.0;
    for (auto c : count)
        worst = std::max(worst, std::abs(static_cast<double>(c) / static_cast<double>(x.size()) - tol::partition_freq));
    return verdict(worst <= tol::partition_freq_tol,
                   "max |state frequency - 1%| = " + f("%.3f", 100 * worst) + "pp (limit 0.3pp)");
}

// --- 4 ----------------------------------------------------------------------------

Outcome criterion4() {
    // test corpus: synthetic GARCH and Laplace/t series at several resolutions,
    // the stored t(5) series, and the equity files when available
    std::vector<std::pair<std::string, GrowthSeries>> corpus;
    for (std::uint64_t s = 1; s <= 5; ++s) corpus.push_back({"garch" + std::to_string(s), proxy_series(s)});
    for (std::uint64_t s = 1; s <= 2; ++s)
        corpus.push_back({"mix" + std::to_string(s), synthetic::as_series(synthetic::laplace_t_mixture(tol::reference_horizon, s))});
    {
        std::ifstream in(fs::path(QHMM_TEST_DATA_DIR) / "t5_series.txt");
        std::vector<double> v;
        for (double x; in >> x;) v.push_back(x);
        if (!v.empty()) corpus.push_back({"t5_series", synthetic::as_series(v)});
    }
    for (const char* t : {"SPY", "NVDA", "JNJ", "JPM"})
        if (auto g = load_data_series(t)) corpus.push_back({t, *g});

    double worst = 0.0;
    std::string worst_name;
    std::size_t fitted = 0;
    for (const auto& [name, g] : corpus)
        for (std::size_t n : {10, 20, 50, 100, 200}) {
            if (g.size() < n) continue;
            const auto m = fit_model(g, n);
            ++fitted;
            if (m.stationary_residual > worst) {
                worst = m.stationary_residual;
                worst_name = name + "/N" + std::to_string(n);
            }
        }
    return verdict(worst < tol::stationary_residual, std::to_string(fitted) + " fitted matrices; max residual=" +
                                                         f("%.3g", worst) + " (" + worst_name + ")");
}

// --- 5 ----------------------------------------------------------------------------

Outcome criterion5() {
    const GridSpec g;
    std::size_t recovered = 0, cells = 0;
    for (std::size_t i = 0; i < g.epsilons.size(); ++i)
        for (std::size_t j = 0; j < g.lambdas.size(); ++j) {
            const double le = std::log10(g.epsilons[i]), l0 = g.lambdas[j];
            const auto r = grid_search(g.epsilons, g.lambdas, [&](double e, double l, std::size_t, std::size_t) {
                const double a = std::log10(e) - le, b = (l - l0) / 30.0;
                return ObjectiveValue{a * a + 0.3 * a * b + b * b, 0};
            });
            ++cells;
            recovered += (r.best_epsilon_index == i && r.best_lambda_index == j) ? 1 : 0;
        }
    return verdict(recovered == cells, "quadratic surface argmin recovered exactly on " + std::to_string(recovered) +
                                           "/" + std::to_string(cells) + " placements of the 8x9 grid");
}

Outcome criterion5_data() {
    const auto spy = load_data_series("SPY");
    if (!spy) return skip("SPY.csv not found under $QHMM_DATA_DIR");
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = fit_model(*spy, tol::reference_states);
    GridSpec g;
    g.paths_per_point = tol::grid_paths_per_point;
    g.horizon = spy->size();
    const auto r = grid_search(model, *spy, g, 5, reference_jumps());
    const double secs = seconds_since(t0);
    const auto target_e = 0u;  // 1e-4
    const auto target_l = static_cast<std::size_t>(std::find(g.lambdas.begin(), g.lambdas.end(), 100.0) - g.lambdas.begin());
    const auto de = r.best_epsilon_index > target_e ? r.best_epsilon_index - target_e : target_e - r.best_epsilon_index;
    const auto dl = r.best_lambda_index > target_l ? r.best_lambda_index - target_l : target_l - r.best_lambda_index;
    const bool ok = de <= 1 && dl <= 1 && r.epsilon_at_lower() && secs <= tol::grid_seconds;
    return verdict(ok, "best (eps, lambda)=(" + f("%g", r.best_epsilon()) + ", " + f("%g", r.best_lambda()) +
                           ") J=" + f("%.4g", r.best_value()) + " eps lower boundary=" +
                           (r.epsilon_at_lower() ? "yes" : "no") + " runtime=" + f("%.0fs", secs));
}

// --- 6 ----------------------------------------------------------------------------

double mean_abs(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Outcome jump_fraction_case(const GrowthSeries& g, const std::string& label) {
    const auto model = fit_model(g, tol::reference_states);
    const auto ens = simulate_ensemble(model, reference_jumps(), tol::reference_paths, tol::reference_horizon, 6);
    const auto r = evaluate_ensemble(g, ens, fast_eval());
    const double frac = ens.jump_fraction();
    const double mae_jump = r.jumps->jump_paths.mae, mae_all = r.jumps->all_paths.mae;
    const bool ok = std::abs(frac - tol::jump_fraction) <= tol::jump_fraction_tol && mae_jump < mae_all;
    return verdict(ok, label + "jump-containing fraction=" + f("%.1f%%", 100 * frac) + " (24 +/- 4pp); ACF-MAE jump=" +
                           f("%.5f", mae_jump) + " all=" + f("%.5f", mae_all) + "; observed mean |ACF|=" +
                           f("%.4f", mean_abs(r.observed_acf)));
}

Outcome criterion6_data() {
    const auto spy = load_data_series("SPY");
    if (!spy) return skip("SPY.csv not found under $QHMM_DATA_DIR");
    return jump_fraction_case(*spy, "");
}

Outcome criterion6_proxy() { return jump_fraction_case(proxy_series(), "[proxy: synthetic GARCH series] "); }

// --- 7 ----------------------------------------------------------------------------

Outcome nj_fidelity(const GrowthSeries& g, double k_lo, double k_hi, const std::string& label) {
    const auto model = fit_model(g, tol::reference_states);
    JumpConfig off;
    off.enabled = false;
    const auto ens = simulate_ensemble(model, off, tol::reference_paths, g.size(), 7);
    const auto r = evaluate_ensemble(g, ens, fast_eval());
    const bool ok = r.ks_pass_rate.value >= tol::nj_ks_min && r.mean_kurtosis.value >= k_lo && r.mean_kurtosis.value <= k_hi;
    return verdict(ok, label + "KS pass=" + f("%.1f%%", r.ks_pass_rate.value) + " simulated excess kurtosis=" +
                           f("%.3f", r.mean_kurtosis.value) + " (window " + f("%.3f", k_lo) + "-" + f("%.3f", k_hi) +
                           ") observed=" + f("%.3f", r.observed_kurtosis));
}

Outcome criterion7_data() {
    const auto spy = load_data_series("SPY");
    if (!spy) return skip("SPY.csv not found under $QHMM_DATA_DIR");
    return nj_fidelity(*spy, tol::nj_kurtosis_lo, tol::nj_kurtosis_hi, "");
}

Outcome criterion7_proxy() {
    // kurtosis window keeps the same offsets from the observed value as the equity case
    const auto g = proxy_series();
    const double k = numeric::excess_kurtosis(g.values);
    return nj_fidelity(g, k + (tol::nj_kurtosis_lo - tol::observed_kurtosis_ref),
                       k + (tol::nj_kurtosis_hi - tol::observed_kurtosis_ref), "[proxy: synthetic GARCH series] ");
}

// --- 8 ----------------------------------------------------------------------------

Outcome criterion8() {
    std::vector<std::string> failed;
    const auto a = synthetic::garch_growth(2000, 81), b = synthetic::laplace_t_mixture(1500, 82);
    if (wasserstein1(a, a) != 0.0) failed.push_back("W1(a,a)");
    const double h = hellinger(a, b);
    if (!(h >= 0.0 && h <= 1.0)) failed.push_back("hellinger range");
    if (hellinger(a, a) != 0.0) failed.push_back("hellinger identical");
    std::vector<double> far(b);
    for (double& v : far) v += 1e6;
    if (hellinger(a, far) != 1.0) failed.push_back("hellinger disjoint");
    if (acf_mae(a, a, 252) != 0.0) failed.push_back("acf_mae(x,x)");
    const std::vector<double> x3{1, 2, 3}, y3{1.5, 2.5, 3.5};
    if (ks_two_sample(x3, y3).statistic != 1.0 / 3.0) failed.push_back("KS D");

    // i.i.d. resampling destroys every autocorrelation, so the ensemble-mean
    // ACF is ~0 and the error equals the observed mean |rho|
    const auto obs = proxy_series(88);
    const auto ens = baseline_generate(BaselineKind::bootstrap, obs, 2000, obs.size(), 8);
    const auto r = evaluate_ensemble(obs, ens, fast_eval());
    double level = 0.0;
    for (double v : r.observed_acf) level += std::abs(v);
    level /= static_cast<double>(r.observed_acf.size());
    const double gap = std::abs(r.acf_mae.value - level);
    if (gap > tol::iid_acf_identity_tol) failed.push_back("iid ACF-MAE identity");

    std::string detail = "W1, Hellinger, acf_mae and KS identities; iid ACF-MAE=" + f("%.5f", r.acf_mae.value) +
                         " mean|rho_obs|=" + f("%.5f", level) + " gap=" + f("%.2g", gap);
    for (const auto& s : failed) detail += "; failed: " + s;
    return verdict(failed.empty(), detail);
}

// --- 9 ----------------------------------------------------------------------------

dep::BivariateCopula copula(dep::Family fam, double theta, double nu = std::numeric_limits<double>::quiet_NaN()) {
    dep::BivariateCopula c;
    c.family = fam;
    c.theta = theta;
    c.nu = nu;
    return c;
}

Outcome criterion9() {
    using dep::Family;
    double worst_tau = 0.0, worst_frank = 0.0, worst_h = 0.0;
    for (double tau : {-0.8, -0.5, -0.2, -0.01, 0.01, 0.2, 0.5, 0.8}) {
        for (auto fam : {Family::gaussian, Family::student_t})
            worst_tau = std::max(worst_tau, std::abs(dep::param_to_tau(fam, dep::tau_to_param(fam, tau)) - tau));
        worst_frank = std::max(worst_frank, std::abs(dep::frank_tau(dep::tau_to_param(Family::frank, tau)) - tau));
        if (tau > 0)
            for (auto fam : {Family::clayton, Family::gumbel})
                worst_tau = std::max(worst_tau, std::abs(dep::param_to_tau(fam, dep::tau_to_param(fam, tau)) - tau));
    }
    const std::vector<dep::BivariateCopula> fams{copula(Family::gaussian, 0.7), copula(Family::student_t, 0.7, 4.0),
                                                 copula(Family::clayton, 3.0), copula(Family::gumbel, 2.5),
                                                 copula(Family::frank, 7.0)};
    for (const auto& c : fams)
        for (int i = 1; i <= 20; ++i)
            for (int j = 1; j <= 20; ++j) {
                const double w = i / 21.0, v = j / 21.0;
                worst_h = std::max(worst_h, std::abs(dep::h_function(c, dep::h_inverse(c, w, v), v) - w));
            }

    // rank reordering keeps every path's sorted values bit-exact
    bool exact = true;
    std::vector<PathEnsemble> assets(3);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t p = 0; p < 50; ++p)
            assets[a].paths.push_back(SimPath{{}, synthetic::garch_growth(500, 100 * a + p), {}});
    Eigen::MatrixXd s(3, 3);
    s << 1, .6, .4, .6, 1, .5, .4, .5, 1;
    const dep::DependenceModel model = dep::make_elliptical(dep::EllipticalKind::student_t, s, 5.0);
    const auto coupled = dep::couple_ensembles(model, assets, 9);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t p = 0; p < 50; ++p) {
            auto x = assets[a].paths[p].growth, y = coupled[a].paths[p].growth;
            std::sort(x.begin(), x.end());
            std::sort(y.begin(), y.end());
            exact = exact && x == y;
        }

    const bool ok = worst_tau <= tol::tau_inverse_tol && worst_frank <= tol::frank_tau_inverse_tol &&
                    worst_h <= tol::h_inverse_tol && exact;
    return verdict(ok, "max tau round-trip error=" + f("%.2g", worst_tau) + " (frank " + f("%.2g", worst_frank) +
                           "); max |h(h^-1(w|v)|v) - w| over 20x20 grid, 5 families=" + f("%.2g", worst_h) +
                           "; rank_reorder sorted values bit-exact=" + (exact ? "yes" : "no"));
}

Outcome criterion9_tail() {
    const double lambda = dep::t_tail_dependence(0.5, 4.0);
    return verdict(std::abs(lambda - tol::tail_reference) <= tol::tail_tol,
                   "t copula tail dependence at rho=0.5, nu=4: " + f("%.5f", lambda) + " (reference 0.18 +/- 0.005)");
}

// --- 10 ---------------------------------------------------------------------------

Outcome criterion10() {
    const auto u = synthetic::t_copula_sample(tol::recovery_n, tol::recovery_d, tol::recovery_rho, tol::recovery_nu, 10);
    const auto fit = dep::fit_t_copula(u);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < fit.sigma.rows(); ++i)
        for (Eigen::Index j = i + 1; j < fit.sigma.cols(); ++j) worst = std::max(worst, std::abs(fit.sigma(i, j) - tol::recovery_rho));
    const bool nu_ok = fit.nu == 4.0 || fit.nu == 5.0 || fit.nu == 6.0;

    std::size_t picked_t = 0;
    std::map<std::string, int> picks;
    for (std::size_t trial = 0; trial < tol::aic_trials; ++trial) {
        const auto b = synthetic::t_copula_sample(tol::aic_trial_n, 2, tol::recovery_rho, tol::recovery_nu, 1000 + trial);
        const std::span<const double> c0(b.data(), tol::aic_trial_n), c1(b.data() + tol::aic_trial_n, tol::aic_trial_n);
        const auto best = dep::fit_bivariate_by_aic(c0, c1);
        ++picks[dep::to_string(best.family)];
        picked_t += best.family == dep::Family::student_t ? 1 : 0;
    }
    const double rate = static_cast<double>(picked_t) / static_cast<double>(tol::aic_trials);
    std::string mix;
    for (const auto& [k, v] : picks) mix += (mix.empty() ? "" : ",") + k + ":" + std::to_string(v);
    return verdict(nu_ok && worst <= tol::sigma_tol && rate >= tol::aic_rate_min,
                   "fitted nu=" + f("%g", fit.nu) + " max |Sigma_ij - 0.6|=" + f("%.4f", worst) +
                       "; AIC picked student_t in " + f("%.0f%%", 100 * rate) + " of bivariate trials (" + mix + ")");
}

// --- 11 ---------------------------------------------------------------------------

struct StudyResult {
    dep::DependenceReport copula;
    dep::DependenceReport sim;
};

StudyResult four_asset_study(const std::vector<GrowthSeries>& g) {
    const std::size_t d = g.size(), n = g.front().size();
    std::vector<PathEnsemble> marg(d);
    std::vector<std::string> tickers;
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < d; ++a) {
        tickers.push_back(g[a].ticker);
        for (std::size_t t = 0; t < n; ++t) obs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) = g[a].values[t];
        const auto model = fit_model(g[a], tol::reference_states);
        marg[a] = simulate_ensemble(model, reference_jumps(), tol::reference_paths, n, numeric::derive_seed(11, {a}));
    }
    const dep::DependenceModel t_copula = dep::fit_t_copula(dep::pit_transform(obs));
    const auto coupled = dep::couple_ensembles(t_copula, marg, 111);

    std::vector<PathEnsemble> sim(d);
    sim[0] = marg[0];
    for (std::size_t a = 1; a < d; ++a) sim[a] = dep::simulate_sim(dep::fit_sim(g[a], g[0]), marg[0], numeric::derive_seed(12, {a}));
    return {dep::correlation_metrics(obs, coupled, tickers, 0.05, 0),
            dep::correlation_metrics(obs, sim, tickers, 0.05, 0)};
}

std::string ks_list(const dep::DependenceReport& r) {
    std::string s;
    for (const auto& t : r.tickers) s += (s.empty() ? "" : " ") + t + "=" + f("%.1f%%", r.per_asset_ks_pass.at(t).value);
    return s;
}

Outcome criterion11_data() {
    std::vector<PriceSeries> prices;
    const auto dir = data_dir();
    for (const char* t : {"SPY", "NVDA", "JNJ", "JPM"}) {
        if (!dir || !fs::exists(*dir / (std::string(t) + ".csv")))
            return skip(std::string(t) + ".csv not found under $QHMM_DATA_DIR");
        prices.push_back(load_price_series((*dir / (std::string(t) + ".csv")).string(), t));
    }
    prices = cli::detail::align_prices(std::move(prices));
    std::vector<GrowthSeries> g;
    for (const auto& p : prices) g.push_back(compute_growth_rates(p, 0.0));
    const auto r = four_asset_study(g);
    double min_ks = 100.0;
    for (const auto& [t, e] : r.copula.per_asset_ks_pass) min_ks = std::min(min_ks, e.value);
    const double jpm_sim = r.sim.per_asset_ks_pass.at("JPM").value;
    const bool ok = min_ks >= tol::copula_ks_min && r.copula.pairwise_corr_mae <= tol::corr_mae_max &&
                    jpm_sim < tol::sim_jpm_ks_max;
    return verdict(ok, "t copula KS pass " + ks_list(r.copula) + " corr MAE=" + f("%.3f", r.copula.pairwise_corr_mae) +
                           "; SIM KS pass " + ks_list(r.sim) + " (JPM must be < 50%)");
}

Outcome criterion11_proxy() {
    // four heavy-tailed marginals tied together by a t copula
    const std::size_t n = tol::reference_horizon;
    const auto u = synthetic::t_copula_sample(n, 4, 0.5, 5.0, 1111);
    std::vector<GrowthSeries> g;
    const char* names[] = {"MKT", "AS1", "AS2", "AS3"};
    for (Eigen::Index a = 0; a < 4; ++a) {
        auto values = synthetic::garch_growth(n, 40 + static_cast<std::uint64_t>(a));
        std::vector<double> sorted(values);
        std::sort(sorted.begin(), sorted.end());
        const auto order = dep::rank_order(std::span<const double>(u.col(a).data(), n));
        for (std::size_t k = 0; k < n; ++k) values[order[k]] = sorted[k];
        g.push_back(synthetic::as_series(std::move(values), names[a]));
    }
    const auto r = four_asset_study(g);
    double min_ks = 100.0;
    for (const auto& [t, e] : r.copula.per_asset_ks_pass) min_ks = std::min(min_ks, e.value);
    const bool ok = min_ks >= tol::copula_ks_min && r.copula.pairwise_corr_mae <= tol::corr_mae_max;
    return verdict(ok, "[proxy: synthetic t-copula assets; SIM failure mode needs the equity data] t copula KS pass " +
                           ks_list(r.copula) + " corr MAE=" + f("%.3f", r.copula.pairwise_corr_mae) +
                           "; SIM KS pass (informational) " + ks_list(r.sim));
}

// --- 12 ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion12() {
    const auto dir = synthetic::scratch_dir("acceptance_determinism");
    const auto m = synthetic::garch_growth(900, 121);
    const auto e = synthetic::garch_growth(900, 122);
    std::vector<double> b(m.size());
    for (std::size_t t = 0; t < m.size(); ++t) b[t] = 0.9 * m[t] + 0.6 * e[t];
    synthetic::write_prices(dir / "AAA.csv", m);
    synthetic::write_prices(dir / "BBB.csv", b);
    const nlohmann::json j{{"tickers", {"AAA", "BBB"}},
                           {"data", {{"AAA", "AAA.csv"}, {"BBB", "BBB.csv"}}},
                           {"n_states", 20},
                           {"grid", {{"epsilons", {1e-4, 1e-3}}, {"lambdas", {10, 100}}, {"paths_per_point", 4},
                                     {"horizon", 400}, {"max_lag", 30}}},
                           {"paths", 40},
                           {"seed", 12},
                           {"bootstrap_b", 30},
                           {"acf_max_lag", 30},
                           {"state_sweep", {10, 20}},
                           {"dependence", "vine"}};
    std::ofstream(dir / "config.json") << j.dump(2);
    const auto cfg = cli::load_config(dir / "config.json");

    const std::vector<cli::Command> cmds{cli::Command::fit, cli::Command::calibrate, cli::Command::simulate,
                                        cli::Command::validate, cli::Command::portfolio, cli::Command::report};
    const std::vector<std::pair<std::string, unsigned>> runs{{"run_a", 1}, {"run_b", 1}, {"run_c", 3}};
    for (const auto& [name, workers] : runs) {
        cli::RunOptions o;
        o.out_dir = dir / name;
        o.workers = workers;
        for (auto c : cmds) cli::run_command(c, cfg, o);
    }
    std::size_t compared = 0;
    std::vector<std::string> differ;
    for (const auto& entry : fs::directory_iterator(dir / "run_a")) {
        const auto name = entry.path().filename().string();
        if (name.rfind("manifest_", 0) == 0) continue;  // run metadata with a timestamp
        const auto ref = slurp(entry.path());
        for (const char* other : {"run_b", "run_c"})
            if (slurp(dir / other / name) != ref) differ.push_back(std::string(other) + "/" + name);
        ++compared;
    }
    std::string detail = std::to_string(compared) + " artifacts from all six commands compared across 3 runs (1, 1, 3 workers)";
    for (const auto& d : differ) detail += "; differs: " + d;
    return verdict(differ.empty() && compared > 0, detail);
}

// --- driver -------------------------------------------------------------------------

const std::vector<std::pair<std::string, std::function<Outcome()>>>& cases() {
    static const std::vector<std::pair<std::string, std::function<Outcome()>>> all{
        {"1", criterion1},           {"2", criterion2},
        {"3", criterion3},           {"4", criterion4},
        {"5", criterion5},           {"5-data", criterion5_data},
        {"6-data", criterion6_data}, {"6-proxy", criterion6_proxy},
        {"7-data", criterion7_data}, {"7-proxy", criterion7_proxy},
        {"8", criterion8},           {"9", criterion9},
        {"9-tail", criterion9_tail}, {"10", criterion10},
        {"11-data", criterion11_data}, {"11-proxy", criterion11_proxy},
        {"12", criterion12}};
    return all;
}

Status run_case(const std::string& id, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* word = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << id << ": " << word << "  " << o.detail << std::endl;
    return o.status;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 2) {
        std::cerr << "usage: qhmm_acceptance [case]\n";
        return 2;
    }
    if (argc == 2) {
        for (const auto& [id, fn] : cases())
            if (id == argv[1]) {
                const auto s = run_case(id, fn);
                return s == Status::pass ? 0 : s == Status::skip ? 77 : 1;
            }
        std::cerr << "unknown case '" << argv[1] << "'\n";
        return 2;
    }
    bool any_fail = false;
    for (const auto& [id, fn] : cases()) any_fail = run_case(id, fn) == Status::fail || any_fail;
    return any_fail ? 1 : 0;
}
