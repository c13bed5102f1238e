#pragma once

// Validation metrics comparing synthetic paths with an observed series:
// two-sample KS and Anderson-Darling tests, Wasserstein-1, Hellinger distance,
// absolute-growth ACF error, quantile-envelope coverage, and ensemble-level
// aggregation with standard errors.

#include "qhmm/calibrate.hpp"
#include "qhmm/data.hpp"
#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/numeric/distributions.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"
#include "qhmm/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

namespace qhmm {

// --- two-sample tests ---------------------------------------------------------

/// D = sup |F_a - F_b| over the pooled sample; p-value from the asymptotic
/// Kolmogorov distribution at effective size n m / (n + m).
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DataError("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    // |i/n - j/m| kept as the integer |i m - j n| so D is a single rounding of the exact ratio
    std::size_t i = 0, j = 0;
    std::uint64_t gap = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        const std::uint64_t p = i * y.size(), q = j * x.size();
        gap = std::max(gap, p > q ? p - q : q - p);
    }
    const double d = static_cast<double>(gap) / (n * m);
    TestResult r;
    r.statistic = d;
    r.p_value = numeric::kolmogorov_sf(std::sqrt(n * m / (n + m)) * d);
    return r;
}

struct AdResult {
    double a2 = 0.0;            ///< midrank k-sample statistic A2akN
    double standardized = 0.0;  ///< (A2 - (k-1)) / sigma_N
    double p_value = 1.0;

    bool reject_at(double alpha) const noexcept { return p_value < alpha; }
    TestResult as_test() const { return {standardized, p_value}; }
};

namespace detail {

// Standardized critical points for k = 2 (m = k - 1 = 1):
// t(alpha) = b0 + b1/sqrt(m) + b2/m.
inline constexpr std::array<double, 7> ad_alpha{0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001};
inline constexpr std::array<double, 7> ad_b0{0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
inline constexpr std::array<double, 7> ad_b1{-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
inline constexpr std::array<double, 7> ad_b2{-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};

inline std::array<double, 7> ad_critical_points(double m) {
    std::array<double, 7> c{};
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = ad_b0[i] + ad_b1[i] / std::sqrt(m) + ad_b2[i] / m;
    return c;
}

/// log-linear interpolation of alpha between tabulated critical points,
/// extrapolated along the end segments and clamped to [0, 1].
inline double ad_p_value(double t, double m) {
    const auto crit = ad_critical_points(m);
    std::size_t seg = 0;
    if (t >= crit.back()) seg = crit.size() - 2;
    else
        while (seg + 2 < crit.size() && t > crit[seg + 1]) ++seg;
    const double la = std::log(ad_alpha[seg]), lb = std::log(ad_alpha[seg + 1]);
    const double w = (t - crit[seg]) / (crit[seg + 1] - crit[seg]);
    return std::clamp(std::exp(la + w * (lb - la)), 0.0, 1.0);
}

} // namespace detail

/// Two-sample Anderson-Darling test (k-sample form with k = 2, midrank
/// treatment of ties) standardized by its exact finite-sample variance.
inline AdResult ad_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("ad_two_sample: each sample needs >= 2 values");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
    const double big_n = n1 + n2;

    double sum1 = 0.0, sum2 = 0.0;
    std::size_t i = 0, j = 0;
    double cum_b = 0.0, cum_m1 = 0.0, cum_m2 = 0.0;
    while (i < x.size() || j < y.size()) {
        double v;
        if (i == x.size()) v = y[j];
        else if (j == y.size()) v = x[i];
        else v = std::min(x[i], y[j]);
        double f1 = 0.0, f2 = 0.0;
        while (i < x.size() && x[i] == v) ++i, f1 += 1.0;
        while (j < y.size() && y[j] == v) ++j, f2 += 1.0;
        const double l = f1 + f2;
        cum_b += l;
        cum_m1 += f1;
        cum_m2 += f2;
        const double ba = cum_b - l / 2.0;
        const double denom = ba * (big_n - ba) - big_n * l / 4.0;
        if (denom <= 0.0) continue;
        const double ma1 = cum_m1 - f1 / 2.0, ma2 = cum_m2 - f2 / 2.0;
        const double d1 = big_n * ma1 - n1 * ba, d2 = big_n * ma2 - n2 * ba;
        sum1 += l * d1 * d1 / denom;
        sum2 += l * d2 * d2 / denom;
    }
    AdResult r;
    r.a2 = (big_n - 1.0) / (big_n * big_n) * (sum1 / n1 + sum2 / n2);

    // Finite-sample variance of A2 under the null (k = 2).
    const double k = 2.0;
    const double hh = 1.0 / n1 + 1.0 / n2;
    const auto nn = x.size() + y.size();
    std::vector<double> harmonic(nn, 0.0);  // harmonic[i] = sum_{j<=i} 1/j
    for (std::size_t t = 1; t < nn; ++t) harmonic[t] = harmonic[t - 1] + 1.0 / static_cast<double>(t);
    const double h = harmonic[nn - 1];
    double g = 0.0;
    for (std::size_t t = 1; t + 1 < nn; ++t) g += (h - harmonic[t]) / static_cast<double>(nn - t);
    const double ca = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * hh;
    const double cb = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * hh - 8.0 * h + 4.0 * g - 6.0;
    const double cc = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k + (2.0 * h - 6.0) * hh + 4.0 * h;
    const double cd = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    const double var = (ca * big_n * big_n * big_n + cb * big_n * big_n + cc * big_n + cd) /
                       ((big_n - 1.0) * (big_n - 2.0) * (big_n - 3.0));
    r.standardized = (r.a2 - (k - 1.0)) / std::sqrt(var);
    r.p_value = detail::ad_p_value(r.standardized, k - 1.0);
    return r;
}

// --- distances ----------------------------------------------------------------

/// Integral over u of |F_a^-1(u) - F_b^-1(u)| with step quantile functions;
/// equals the mean absolute difference of sorted values for equal lengths.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DataError("wasserstein1: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x.size() == y.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        return s / static_cast<double>(x.size());
    }
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double u = 0.0, total = 0.0;
    while (i < x.size() && j < y.size()) {
        const double next_a = static_cast<double>(i + 1) / n;
        const double next_b = static_cast<double>(j + 1) / m;
        const double next = std::min(next_a, next_b);
        total += (next - u) * std::abs(x[i] - y[j]);
        u = next;
        // advance by exact integer comparison to avoid drift: (i+1) m vs (j+1) n
        const auto lhs = static_cast<unsigned long long>(i + 1) * y.size();
        const auto rhs = static_cast<unsigned long long>(j + 1) * x.size();
        if (lhs <= rhs) ++i;
        if (rhs <= lhs) ++j;
    }
    return total;
}

/// H = sqrt(sum (sqrt p - sqrt q)^2 / 2) for two probability vectors.
inline double hellinger_from_masses(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DataError("hellinger: mass vectors differ in length");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double d = std::sqrt(p[k]) - std::sqrt(q[k]);
        s += d * d;
    }
    return std::min(1.0, std::sqrt(s / 2.0));
}

/// Hellinger distance between equal-width histograms over the common support.
inline double hellinger(std::span<const double> a, std::span<const double> b, std::size_t bins = 50) {
    if (a.empty() || b.empty()) throw DataError("hellinger: empty sample");
    if (bins < 1) throw ConfigError("hellinger: bins must be >= 1");
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
    if (!(hi > lo)) return 0.0;  // every value in both samples is the same number
    const double width = (hi - lo) / static_cast<double>(bins);
    auto histogram = [&](std::span<const double> s) {
        std::vector<double> h(bins, 0.0);
        for (double v : s) {
            auto k = static_cast<std::size_t>((v - lo) / width);
            h[std::min(k, bins - 1)] += 1.0;
        }
        for (double& c : h) c /= static_cast<double>(s.size());
        return h;
    };
    return hellinger_from_masses(histogram(a), histogram(b));
}

/// Mean absolute difference of the |x| autocorrelations over lags 1..max_lag.
inline double acf_mae(std::span<const double> observed, std::span<const double> simulated,
                      std::size_t max_lag = 252) {
    const auto ro = numeric::autocorrelation(absolute_values(observed), max_lag);
    const auto rs = numeric::autocorrelation(absolute_values(simulated), max_lag);
    double s = 0.0;
    for (std::size_t k = 0; k < max_lag; ++k) s += std::abs(ro[k] - rs[k]);
    return s / static_cast<double>(max_lag);
}

inline double acf_mae(std::span<const double> acf_a, std::span<const double> acf_b, std::nullptr_t) {
    if (acf_a.size() != acf_b.size() || acf_a.empty()) throw DataError("acf_mae: ACF length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < acf_a.size(); ++k) s += std::abs(acf_a[k] - acf_b[k]);
    return s / static_cast<double>(acf_a.size());
}

// --- quantile coverage --------------------------------------------------------

struct QuantileEnvelope {
    std::vector<double> probes;    ///< 0.01 .. 0.99
    std::vector<double> observed;  ///< observed quantile per probe
    std::vector<double> lower;     ///< 5th percentile of synthetic quantiles
    std::vector<double> upper;     ///< 95th percentile of synthetic quantiles
};

struct CoverageResult {
    double percentage = 0.0;
    QuantileEnvelope envelope;
};

namespace detail {

inline std::vector<double> percentile_probes() {
    std::vector<double> p(99);
    for (int q = 1; q <= 99; ++q) p[static_cast<std::size_t>(q - 1)] = q / 100.0;
    return p;
}

inline std::vector<double> probe_quantiles(std::span<const double> x) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    std::vector<double> out(99);
    for (int q = 1; q <= 99; ++q) out[static_cast<std::size_t>(q - 1)] = numeric::quantile_sorted(s, q / 100.0);
    return out;
}

/// Coverage for a subset (with multiplicity) of per-path probe quantile rows.
inline CoverageResult coverage_from_rows(const std::vector<double>& observed_q,
                                         const std::vector<std::vector<double>>& rows,
                                         std::span<const std::size_t> pick) {
    CoverageResult r;
    r.envelope.probes = percentile_probes();
    r.envelope.observed = observed_q;
    r.envelope.lower.resize(99);
    r.envelope.upper.resize(99);
    std::vector<double> column(pick.size());
    std::size_t inside = 0;
    for (std::size_t q = 0; q < 99; ++q) {
        for (std::size_t i = 0; i < pick.size(); ++i) column[i] = rows[pick[i]][q];
        std::sort(column.begin(), column.end());
        r.envelope.lower[q] = numeric::quantile_sorted(column, 0.05);
        r.envelope.upper[q] = numeric::quantile_sorted(column, 0.95);
        if (observed_q[q] >= r.envelope.lower[q] && observed_q[q] <= r.envelope.upper[q]) ++inside;
    }
    r.percentage = 100.0 * static_cast<double>(inside) / 99.0;
    return r;
}

} // namespace detail

inline CoverageResult quantile_coverage(std::span<const double> observed, const PathEnsemble& ensemble) {
    if (ensemble.paths.empty()) throw DataError("quantile_coverage: empty ensemble");
    std::vector<std::vector<double>> rows;
    rows.reserve(ensemble.size());
    for (const auto& p : ensemble.paths) rows.push_back(detail::probe_quantiles(p.growth));
    std::vector<std::size_t> all(rows.size());
    std::iota(all.begin(), all.end(), 0);
    return detail::coverage_from_rows(detail::probe_quantiles(observed), rows, all);
}

// --- ensemble evaluation ------------------------------------------------------

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct PathMetrics {
    double ks_d = 0.0, ks_p = 1.0;
    double ad_t = 0.0, ad_p = 1.0;
    double w1 = 0.0;
    double hellinger = 0.0;
    double kurtosis = std::numeric_limits<double>::quiet_NaN();
    double acf_mae = std::numeric_limits<double>::quiet_NaN();
    bool contains_jump = false;
};

/// ACF of |G| averaged over a subset of paths, with a 10th-90th percentile band.
struct AcfCurve {
    std::size_t n_paths = 0;
    std::vector<double> mean;
    std::vector<double> p10;
    std::vector<double> p90;
    double mae = std::numeric_limits<double>::quiet_NaN();  ///< vs observed ACF
};

struct JumpConditioned {
    std::size_t n_jump_paths = 0;
    double jump_fraction = 0.0;
    AcfCurve all_paths;
    AcfCurve jump_paths;
};

struct MetricReport {
    double alpha = 0.05;
    std::size_t n_paths = 0;
    std::size_t horizon = 0;      ///< simulated steps used (after trimming)
    std::size_t acf_max_lag = 0;  ///< effective lag count
    bool degenerate_se = false;   ///< single-path ensemble: SEs are 0 by convention

    Estimate ks_pass_rate;   ///< % with binomial SE
    Estimate ad_pass_rate;
    Estimate mean_w1;        ///< std/sqrt(n) SE
    Estimate mean_hellinger;
    Estimate mean_kurtosis;
    Estimate acf_mae;        ///< ensemble-mean ACF vs observed, bootstrap SE
    Estimate coverage_pct;   ///< bootstrap SE

    double observed_kurtosis = 0.0;
    std::vector<double> observed_acf;
    QuantileEnvelope envelope;
    AcfCurve acf_all;  ///< all usable paths
    std::optional<JumpConditioned> jumps;
    std::vector<PathMetrics> per_path;  ///< in ensemble order
};

struct EvaluateOptions {
    double alpha = 0.05;
    std::size_t bootstrap_b = 500;
    std::uint64_t bootstrap_seed = 0;
    std::size_t max_lag = 252;
    std::size_t hellinger_bins = 50;
    unsigned workers = 0;
};

namespace detail {

inline Estimate pass_rate(std::span<const PathMetrics> m, double alpha, bool ks) {
    const double n = static_cast<double>(m.size());
    double pass = 0.0;
    for (const auto& x : m) pass += ((ks ? x.ks_p : x.ad_p) >= alpha) ? 1.0 : 0.0;
    const double p = pass / n;
    return {100.0 * p, 100.0 * std::sqrt(p * (1.0 - p) / n)};
}

template <class Get>
inline Estimate mean_with_se(std::span<const PathMetrics> m, Get get) {
    std::vector<double> v;
    v.reserve(m.size());
    for (const auto& x : m) {
        const double value = get(x);
        if (std::isfinite(value)) v.push_back(value);
    }
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    return {numeric::mean(v), numeric::standard_error(v)};
}

inline AcfCurve acf_curve(const std::vector<std::vector<double>>& acfs, std::span<const std::size_t> pick,
                          std::span<const double> observed_acf) {
    AcfCurve c;
    const std::size_t lags = observed_acf.size();
    std::vector<std::size_t> usable;
    for (auto i : pick)
        if (!acfs[i].empty()) usable.push_back(i);
    c.n_paths = usable.size();
    if (usable.empty()) return c;
    c.mean.assign(lags, 0.0);
    c.p10.resize(lags);
    c.p90.resize(lags);
    std::vector<double> column(usable.size());
    for (std::size_t k = 0; k < lags; ++k) {
        for (std::size_t i = 0; i < usable.size(); ++i) column[i] = acfs[usable[i]][k];
        c.mean[k] = numeric::mean(column);
        std::sort(column.begin(), column.end());
        c.p10[k] = numeric::quantile_sorted(column, 0.10);
        c.p90[k] = numeric::quantile_sorted(column, 0.90);
    }
    c.mae = acf_mae(observed_acf, c.mean, nullptr);
    return c;
}

/// Ensemble-mean ACF error for a resampled set of path rows.
inline double mean_acf_mae(const std::vector<std::vector<double>>& acfs, std::span<const std::size_t> pick,
                           std::span<const double> observed_acf) {
    std::vector<double> m(observed_acf.size(), 0.0);
    std::size_t used = 0;
    for (auto i : pick) {
        if (acfs[i].empty()) continue;
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += acfs[i][k];
        ++used;
    }
    if (used == 0) return std::numeric_limits<double>::quiet_NaN();
    for (double& v : m) v /= static_cast<double>(used);
    return acf_mae(observed_acf, m, nullptr);
}

} // namespace detail

/// Evaluate an ensemble against an observed series.
///
/// Simulated paths longer than the observed window are trimmed to their first
/// n_obs steps. Paths are put into a canonical order before aggregation so the
/// report does not depend on the order they were supplied in. ACF-MAE compares
/// the observed ACF with the ensemble-mean ACF; its SE and the coverage SE
/// come from resampling whole paths.
inline MetricReport evaluate_ensemble(std::span<const double> observed, const PathEnsemble& input,
                                      const EvaluateOptions& opt = {}) {
    if (input.paths.empty()) throw DataError("evaluate_ensemble: empty ensemble");
    if (observed.size() < 4) throw DataError("evaluate_ensemble: observed series too short");
    const PathEnsemble trimmed_storage = input.horizon > observed.size() ? input.trimmed(observed.size()) : PathEnsemble{};
    const PathEnsemble& ens = input.horizon > observed.size() ? trimmed_storage : input;

    // canonical path order: lexicographic on the growth values
    std::vector<std::size_t> order(ens.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(ens.paths[a].growth.begin(), ens.paths[a].growth.end(),
                                            ens.paths[b].growth.begin(), ens.paths[b].growth.end());
    });

    MetricReport r;
    r.alpha = opt.alpha;
    r.n_paths = ens.size();
    r.horizon = ens.horizon;
    r.degenerate_se = ens.size() < 2;
    std::size_t min_len = observed.size();
    for (const auto& p : ens.paths) min_len = std::min(min_len, p.growth.size());
    r.acf_max_lag = std::min(opt.max_lag, min_len - 1);
    r.observed_kurtosis = numeric::excess_kurtosis(observed);
    r.observed_acf = numeric::autocorrelation(absolute_values(observed), r.acf_max_lag);

    const auto observed_q = detail::probe_quantiles(observed);
    std::vector<PathMetrics> metrics(ens.size());
    std::vector<std::vector<double>> acfs(ens.size());
    std::vector<std::vector<double>> quantile_rows(ens.size());
    numeric::parallel_for(ens.size(), opt.workers, [&](std::size_t idx) {
        const auto& path = ens.paths[order[idx]];
        auto& m = metrics[idx];
        const auto ks = ks_two_sample(observed, path.growth);
        m.ks_d = ks.statistic;
        m.ks_p = ks.p_value;
        const auto ad = ad_two_sample(observed, path.growth);
        m.ad_t = ad.standardized;
        m.ad_p = ad.p_value;
        m.w1 = wasserstein1(observed, path.growth);
        m.hellinger = hellinger(observed, path.growth, opt.hellinger_bins);
        m.contains_jump = path.contains_jump();
        quantile_rows[idx] = detail::probe_quantiles(path.growth);
        try {
            m.kurtosis = numeric::excess_kurtosis(path.growth);
            acfs[idx] = numeric::autocorrelation(absolute_values(path.growth), r.acf_max_lag);
            m.acf_mae = acf_mae(r.observed_acf, acfs[idx], nullptr);
        } catch (const NumericError&) {
            acfs[idx].clear();  // zero-variance path: excluded from ACF and kurtosis averages
        }
    });

    r.ks_pass_rate = detail::pass_rate(metrics, opt.alpha, true);
    r.ad_pass_rate = detail::pass_rate(metrics, opt.alpha, false);
    r.mean_w1 = detail::mean_with_se(metrics, [](const PathMetrics& m) { return m.w1; });
    r.mean_hellinger = detail::mean_with_se(metrics, [](const PathMetrics& m) { return m.hellinger; });
    r.mean_kurtosis = detail::mean_with_se(metrics, [](const PathMetrics& m) { return m.kurtosis; });

    std::vector<std::size_t> all(ens.size());
    std::iota(all.begin(), all.end(), 0);
    r.acf_mae.value = detail::mean_acf_mae(acfs, all, r.observed_acf);
    const auto coverage = detail::coverage_from_rows(observed_q, quantile_rows, all);
    r.coverage_pct.value = coverage.percentage;
    r.envelope = coverage.envelope;

    if (ens.size() >= 2 && opt.bootstrap_b >= 2) {
        std::vector<double> boot_acf(opt.bootstrap_b), boot_cov(opt.bootstrap_b);
        numeric::parallel_for(opt.bootstrap_b, opt.workers, [&](std::size_t b) {
            auto rng = numeric::make_stream(opt.bootstrap_seed, {b});
            std::uniform_int_distribution<std::size_t> pick(0, ens.size() - 1);
            std::vector<std::size_t> sample(ens.size());
            for (auto& s : sample) s = pick(rng);
            boot_acf[b] = detail::mean_acf_mae(acfs, sample, r.observed_acf);
            boot_cov[b] = detail::coverage_from_rows(observed_q, quantile_rows, sample).percentage;
        });
        std::erase_if(boot_acf, [](double v) { return !std::isfinite(v); });
        r.acf_mae.se = boot_acf.size() >= 2 ? numeric::stddev(boot_acf) : 0.0;
        r.coverage_pct.se = numeric::stddev(boot_cov);
    }

    r.acf_all = detail::acf_curve(acfs, all, r.observed_acf);

    const bool has_states = std::any_of(ens.paths.begin(), ens.paths.end(),
                                        [](const SimPath& p) { return !p.states.empty(); });
    if (has_states) {
        JumpConditioned j;
        std::vector<std::size_t> jump_idx;
        for (std::size_t i = 0; i < metrics.size(); ++i)
            if (metrics[i].contains_jump) jump_idx.push_back(i);
        j.n_jump_paths = jump_idx.size();
        j.jump_fraction = static_cast<double>(jump_idx.size()) / static_cast<double>(ens.size());
        j.all_paths = r.acf_all;
        j.jump_paths = detail::acf_curve(acfs, jump_idx, r.observed_acf);
        r.jumps = std::move(j);
    }

    // back to caller order for per-path export
    r.per_path.resize(metrics.size());
    for (std::size_t idx = 0; idx < order.size(); ++idx) r.per_path[order[idx]] = metrics[idx];
    return r;
}

inline MetricReport evaluate_ensemble(const GrowthSeries& observed, const PathEnsemble& ens,
                                      const EvaluateOptions& opt = {}) {
    return evaluate_ensemble(std::span<const double>(observed.values), ens, opt);
}

// --- state-resolution sweep ---------------------------------------------------

struct ResolutionRow {
    std::size_t n_states = 0;
    std::size_t min_support = 0;
    std::size_t unvisited_states = 0;
    double ks_pass_no_jump = 0.0;
    double ad_pass_no_jump = 0.0;
    double ks_pass_jump = 0.0;
    double ad_pass_jump = 0.0;
};

/// Refit and re-evaluate the model for each state count, with and without jumps.
inline std::vector<ResolutionRow> sweep_state_resolution(const GrowthSeries& observed,
                                                         std::span<const std::size_t> state_counts, double nu,
                                                         const JumpConfig& jump, std::size_t paths,
                                                         std::uint64_t seed, EvaluateOptions opt = {}) {
    std::vector<ResolutionRow> rows;
    opt.bootstrap_b = 0;
    for (std::size_t idx = 0; idx < state_counts.size(); ++idx) {
        const std::size_t n = state_counts[idx];
        const auto model = fit_model(observed, n, nu);
        ResolutionRow row;
        row.n_states = n;
        row.min_support = *std::min_element(model.emissions.support_count.begin(), model.emissions.support_count.end());
        row.unvisited_states = static_cast<std::size_t>(std::count(
            model.emissions.support_count.begin(), model.emissions.support_count.end(), std::size_t{0}));
        JumpConfig off = jump;
        off.enabled = false;
        const auto nj = simulate_ensemble(model, off, paths, observed.size(), numeric::derive_seed(seed, {idx, 0}), opt.workers);
        const auto rep_nj = evaluate_ensemble(observed, nj, opt);
        row.ks_pass_no_jump = rep_nj.ks_pass_rate.value;
        row.ad_pass_no_jump = rep_nj.ad_pass_rate.value;
        JumpConfig on = jump;
        on.enabled = true;
        const auto wj = simulate_ensemble(model, on, paths, observed.size(), numeric::derive_seed(seed, {idx, 1}), opt.workers);
        const auto rep_wj = evaluate_ensemble(observed, wj, opt);
        row.ks_pass_jump = rep_wj.ks_pass_rate.value;
        row.ad_pass_jump = rep_wj.ad_pass_rate.value;
        rows.push_back(row);
    }
    return rows;
}

// --- serialization ------------------------------------------------------------

inline nlohmann::json to_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

inline nlohmann::json to_json(const AcfCurve& c) {
    return {{"n_paths", c.n_paths}, {"acf_mae", std::isfinite(c.mae) ? nlohmann::json(c.mae) : nlohmann::json(nullptr)}};
}

/// Mirrors one column of the model-comparison table.
inline nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j{{"alpha", r.alpha},
                     {"n_paths", r.n_paths},
                     {"horizon", r.horizon},
                     {"acf_max_lag", r.acf_max_lag},
                     {"degenerate_se", r.degenerate_se},
                     {"ks_pass_rate", to_json(r.ks_pass_rate)},
                     {"ad_pass_rate", to_json(r.ad_pass_rate)},
                     {"excess_kurtosis_observed", r.observed_kurtosis},
                     {"excess_kurtosis_simulated", to_json(r.mean_kurtosis)},
                     {"acf_mae", to_json(r.acf_mae)},
                     {"coverage_pct", to_json(r.coverage_pct)},
                     {"wasserstein1", to_json(r.mean_w1)},
                     {"hellinger", to_json(r.mean_hellinger)}};
    if (r.jumps)
        j["jump_conditioned"] = {{"n_jump_paths", r.jumps->n_jump_paths},
                                 {"jump_fraction", r.jumps->jump_fraction},
                                 {"all_paths", to_json(r.jumps->all_paths)},
                                 {"jump_paths", to_json(r.jumps->jump_paths)}};
    return j;
}

inline void write_per_path_csv(std::ostream& out, const MetricReport& r) {
    out << "path_id,ks_d,ks_p,ad_t,ad_p,wasserstein1,hellinger,excess_kurtosis,acf_mae,contains_jump\n";
    char buf[320];
    for (std::size_t i = 0; i < r.per_path.size(); ++i) {
        const auto& m = r.per_path[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", i, m.ks_d, m.ks_p,
                      m.ad_t, m.ad_p, m.w1, m.hellinger, m.kurtosis, m.acf_mae, m.contains_jump ? 1 : 0);
        out << buf;
    }
}

} // namespace qhmm
