#pragma once

// Empirical hidden Markov model built by partitioning growth rates into
// equal-probability bins of a fitted Laplace distribution. Every component is
// estimated by direct counting; no EM iterations are involved.
//
// States are 0-based internally (0..N-1). State 0 holds the most negative
// growth rates. Exported files use 1-based labels.

#include "qhmm/data.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/distributions.hpp"
#include "qhmm/numeric/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace qhmm {

using State = std::uint32_t;
using StateSequence = std::vector<State>;

struct LaplaceFit {
    double mu = 0.0;
    double b = 1.0;
};

struct QuantilePartition {
    std::size_t n_states = 0;
    /// Q_0 < Q_1 < ... < Q_N; the outer two are the 0.001 / 0.999 quantiles.
    std::vector<double> boundaries;

    std::span<const double> interior() const {
        return std::span<const double>(boundaries).subspan(1, n_states - 1);
    }
};

struct TransitionMatrix {
    std::size_t n_states = 0;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::string> warnings;
};

struct EmissionTable {
    std::vector<double> mu;
    std::vector<double> sigma;
    double nu = 5.0;
    std::vector<std::size_t> support_count;
    std::vector<std::string> warnings;
};

struct StationaryResult {
    std::vector<double> pi;
    double residual = 0.0;  ///< ||pi T - pi||_inf after renormalization
};

struct HmmModel {
    std::string ticker;
    LaplaceFit laplace;
    QuantilePartition partition;
    TransitionMatrix transitions;
    EmissionTable emissions;
    std::vector<double> stationary;
    double stationary_residual = 0.0;

    std::size_t n_states() const noexcept { return partition.n_states; }
    std::string id() const { return ticker + "-N" + std::to_string(n_states()); }
};

// ---------------------------------------------------------------------------

/// Laplace MLE: location = sample median, scale = mean absolute deviation from it.
inline LaplaceFit fit_laplace_mle(std::span<const double> x) {
    if (x.size() < 2) throw NumericError("fit_laplace_mle needs at least 2 observations");
    LaplaceFit fit;
    fit.mu = numeric::median(x);
    double s = 0.0;
    for (double v : x) s += std::abs(v - fit.mu);
    fit.b = s / static_cast<double>(x.size());
    if (!(fit.b > 0.0)) throw NumericError("fit_laplace_mle: all observations identical (b = 0)");
    return fit;
}

inline LaplaceFit fit_laplace_mle(const GrowthSeries& g) { return fit_laplace_mle(g.values); }

inline double laplace_quantile(const LaplaceFit& fit, double q) {
    if (!(q > 0.0 && q < 1.0)) throw NumericError("laplace_quantile: q must lie in (0,1)");
    return q <= 0.5 ? fit.mu + fit.b * std::log(2.0 * q) : fit.mu - fit.b * std::log(2.0 * (1.0 - q));
}

inline double laplace_cdf(const LaplaceFit& fit, double x) {
    const double z = (x - fit.mu) / fit.b;
    return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

inline constexpr double outer_lower_quantile = 0.001;
inline constexpr double outer_upper_quantile = 0.999;

inline QuantilePartition build_partition(const LaplaceFit& fit, std::size_t n_states) {
    if (n_states < 2) throw ConfigError("build_partition: n_states must be >= 2");
    QuantilePartition p;
    p.n_states = n_states;
    p.boundaries.resize(n_states + 1);
    p.boundaries.front() = laplace_quantile(fit, outer_lower_quantile);
    p.boundaries.back() = laplace_quantile(fit, outer_upper_quantile);
    const double n = static_cast<double>(n_states);
    for (std::size_t k = 1; k < n_states; ++k)
        p.boundaries[k] = laplace_quantile(fit, static_cast<double>(k) / n);
    for (std::size_t k = 1; k <= n_states; ++k)
        if (!(p.boundaries[k] > p.boundaries[k - 1]))
            throw NumericError("build_partition: boundaries not strictly increasing at k=" + std::to_string(k));
    return p;
}

/// Q_{k-1} < x <= Q_k maps to state k-1 (0-based); values outside the finite
/// outer bounds are clamped into the extreme states.
inline State encode_state(double x, const QuantilePartition& p) {
    const auto interior = p.interior();
    return static_cast<State>(std::lower_bound(interior.begin(), interior.end(), x) - interior.begin());
}

inline StateSequence encode_states(std::span<const double> x, const QuantilePartition& p) {
    StateSequence s(x.size());
    std::transform(x.begin(), x.end(), s.begin(), [&](double v) { return encode_state(v, p); });
    return s;
}

inline TransitionMatrix estimate_transitions(std::span<const State> states, std::size_t n_states) {
    if (states.size() < 2) throw NumericError("estimate_transitions needs a sequence of length >= 2");
    TransitionMatrix t;
    t.n_states = n_states;
    t.counts.assign(n_states, std::vector<std::uint64_t>(n_states, 0));
    t.rows.assign(n_states, std::vector<double>(n_states, 0.0));
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
        if (states[i] >= n_states || states[i + 1] >= n_states)
            throw DataError("estimate_transitions: state out of range");
        ++t.counts[states[i]][states[i + 1]];
    }
    for (std::size_t i = 0; i < n_states; ++i) {
        std::uint64_t total = 0;
        for (auto c : t.counts[i]) total += c;
        if (total == 0) {
            std::fill(t.rows[i].begin(), t.rows[i].end(), 1.0 / static_cast<double>(n_states));
            t.warnings.push_back("state " + std::to_string(i + 1) +
                                 " has no outgoing transitions; row set to uniform");
            continue;
        }
        for (std::size_t j = 0; j < n_states; ++j)
            t.rows[i][j] = static_cast<double>(t.counts[i][j]) / static_cast<double>(total);
    }
    return t;
}

/// Per-state sample mean and (n-1) standard deviation. States with fewer than
/// two observations fall back to the midpoint of their bin and the pooled
/// within-state standard deviation.
inline EmissionTable estimate_emissions(std::span<const double> x, std::span<const State> states,
                                        const QuantilePartition& partition, double nu = 5.0) {
    if (x.size() != states.size()) throw DataError("estimate_emissions: states not aligned with series");
    if (!(nu > 2.0)) throw ConfigError("estimate_emissions: nu must exceed 2");
    const std::size_t n = partition.n_states;
    EmissionTable e;
    e.nu = nu;
    e.mu.assign(n, 0.0);
    e.sigma.assign(n, 0.0);
    e.support_count.assign(n, 0);

    std::vector<double> sum(n, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (states[t] >= n) throw DataError("estimate_emissions: state out of range");
        sum[states[t]] += x[t];
        ++e.support_count[states[t]];
    }
    for (std::size_t k = 0; k < n; ++k)
        if (e.support_count[k] > 0) e.mu[k] = sum[k] / static_cast<double>(e.support_count[k]);

    std::vector<double> ss(n, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double d = x[t] - e.mu[states[t]];
        ss[states[t]] += d * d;
    }
    double pooled_ss = 0.0;
    std::size_t pooled_dof = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (e.support_count[k] < 2) continue;
        e.sigma[k] = std::sqrt(ss[k] / static_cast<double>(e.support_count[k] - 1));
        pooled_ss += ss[k];
        pooled_dof += e.support_count[k] - 1;
    }
    const double pooled =
        pooled_dof > 0 ? std::sqrt(pooled_ss / static_cast<double>(pooled_dof))
                       : (x.size() >= 2 ? numeric::stddev(x) : 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (e.support_count[k] >= 2) continue;
        e.mu[k] = 0.5 * (partition.boundaries[k] + partition.boundaries[k + 1]);
        e.sigma[k] = pooled;
        e.warnings.push_back("state " + std::to_string(k + 1) + " has " + std::to_string(e.support_count[k]) +
                             " observation(s); using bin midpoint and pooled sigma");
    }
    return e;
}

/// Uniform start vector pushed through 50 products pi <- pi T, then renormalized.
inline StationaryResult stationary_distribution(const TransitionMatrix& t, int powers = 50) {
    const std::size_t n = t.n_states;
    if (n == 0 || t.rows.size() != n) throw NumericError("stationary_distribution: empty matrix");
    for (const auto& row : t.rows) {
        if (row.size() != n) throw NumericError("stationary_distribution: matrix not square");
        double s = 0.0;
        for (double v : row) {
            if (!(v >= 0.0 && v <= 1.0)) throw NumericError("stationary_distribution: entry outside [0,1]");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw NumericError("stationary_distribution: row does not sum to 1");
    }
    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    auto step = [&](const std::vector<double>& in, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (in[i] == 0.0) continue;
            const auto& row = t.rows[i];
            for (std::size_t j = 0; j < n; ++j) out[j] += in[i] * row[j];
        }
    };
    for (int p = 0; p < powers; ++p) {
        step(pi, next);
        pi.swap(next);
    }
    double total = 0.0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;

    StationaryResult r;
    step(pi, next);
    for (std::size_t j = 0; j < n; ++j) r.residual = std::max(r.residual, std::abs(next[j] - pi[j]));
    r.pi = std::move(pi);
    return r;
}

inline HmmModel fit_model(const GrowthSeries& g, std::size_t n_states, double nu = 5.0) {
    if (g.size() < n_states || g.size() < 2)
        throw DataError("fit_model: series of length " + std::to_string(g.size()) + " cannot support " +
                        std::to_string(n_states) + " states");
    HmmModel m;
    m.ticker = g.ticker;
    m.laplace = fit_laplace_mle(g);
    m.partition = build_partition(m.laplace, n_states);
    const auto states = encode_states(g.values, m.partition);
    m.transitions = estimate_transitions(states, n_states);
    m.emissions = estimate_emissions(g.values, states, m.partition, nu);
    auto st = stationary_distribution(m.transitions);
    m.stationary = std::move(st.pi);
    m.stationary_residual = st.residual;
    return m;
}

// --- serialization ----------------------------------------------------------

inline constexpr int hmm_model_format_version = 1;

namespace detail {
inline nlohmann::json dof_to_json(double nu) {
    return numeric::is_gaussian_dof(nu) ? nlohmann::json("inf") : nlohmann::json(nu);
}
inline double dof_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("degrees of freedom must be a number or \"inf\"");
    }
    return j.get<double>();
}
} // namespace detail

inline void to_json(nlohmann::json& j, const HmmModel& m) {
    j = nlohmann::json{
        {"format_version", hmm_model_format_version},
        {"ticker", m.ticker},
        {"n_states", m.n_states()},
        {"nu", detail::dof_to_json(m.emissions.nu)},
        {"laplace", {{"mu", m.laplace.mu}, {"b", m.laplace.b}}},
        {"boundaries", m.partition.boundaries},
        {"counts", m.transitions.counts},
        {"rows", m.transitions.rows},
        {"emissions",
         {{"mu", m.emissions.mu}, {"sigma", m.emissions.sigma}, {"support_count", m.emissions.support_count}}},
        {"stationary", m.stationary},
        {"stationary_residual", m.stationary_residual},
        {"warnings", [&] {
             auto w = m.transitions.warnings;
             w.insert(w.end(), m.emissions.warnings.begin(), m.emissions.warnings.end());
             return w;
         }()}};
}

inline void from_json(const nlohmann::json& j, HmmModel& m) {
    if (j.at("format_version").get<int>() != hmm_model_format_version)
        throw ConfigError("unsupported model format_version");
    m.ticker = j.at("ticker").get<std::string>();
    const auto n = j.at("n_states").get<std::size_t>();
    m.laplace.mu = j.at("laplace").at("mu").get<double>();
    m.laplace.b = j.at("laplace").at("b").get<double>();
    m.partition.n_states = n;
    m.partition.boundaries = j.at("boundaries").get<std::vector<double>>();
    m.transitions.n_states = n;
    m.transitions.counts = j.at("counts").get<std::vector<std::vector<std::uint64_t>>>();
    m.transitions.rows = j.at("rows").get<std::vector<std::vector<double>>>();
    m.transitions.warnings.clear();
    const auto& e = j.at("emissions");
    m.emissions.mu = e.at("mu").get<std::vector<double>>();
    m.emissions.sigma = e.at("sigma").get<std::vector<double>>();
    m.emissions.support_count = e.at("support_count").get<std::vector<std::size_t>>();
    m.emissions.nu = detail::dof_from_json(j.at("nu"));
    m.emissions.warnings = j.value("warnings", std::vector<std::string>{});
    m.stationary = j.at("stationary").get<std::vector<double>>();
    m.stationary_residual = j.at("stationary_residual").get<double>();
    if (m.partition.boundaries.size() != n + 1 || m.transitions.rows.size() != n || m.emissions.mu.size() != n ||
        m.emissions.sigma.size() != n || m.stationary.size() != n)
        throw ConfigError("model document has inconsistent dimensions");
}

} // namespace qhmm
