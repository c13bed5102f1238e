#pragma once

// Jump hyperparameter calibration: absolute-growth ACF and kurtosis matching
// over an (epsilon, lambda) grid.

#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"
#include "qhmm/simulate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace qhmm {

struct AcfVector {
    std::size_t max_lag = 252;
    std::vector<double> values;  ///< values[k-1] is the autocorrelation at lag k
};

inline AcfVector sample_acf(std::span<const double> x, std::size_t max_lag = 252) {
    return AcfVector{max_lag, numeric::autocorrelation(x, max_lag)};
}

inline std::vector<double> absolute_values(std::span<const double> x) {
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::abs(x[i]);
    return a;
}

/// Running ensemble averages of |G| autocorrelation and excess kurtosis.
/// Paths with zero variance are counted and left out of both averages.
class EnsembleMoments {
public:
    explicit EnsembleMoments(std::size_t max_lag) : acf_sum_(max_lag, 0.0) {}

    void add(std::span<const double> growth) {
        try {
            const auto acf = numeric::autocorrelation(absolute_values(growth), acf_sum_.size());
            const double k = numeric::excess_kurtosis(growth);
            for (std::size_t i = 0; i < acf.size(); ++i) acf_sum_[i] += acf[i];
            kurtosis_sum_ += k;
            ++used_;
        } catch (const NumericError&) {
            ++skipped_;
        }
    }

    std::size_t used() const noexcept { return used_; }
    std::size_t skipped() const noexcept { return skipped_; }

    std::vector<double> mean_acf() const {
        std::vector<double> m(acf_sum_.size(), std::numeric_limits<double>::quiet_NaN());
        if (used_ == 0) return m;
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = acf_sum_[i] / static_cast<double>(used_);
        return m;
    }

    double mean_kurtosis() const {
        return used_ ? kurtosis_sum_ / static_cast<double>(used_) : std::numeric_limits<double>::quiet_NaN();
    }

    /// J = sum_tau (acf_obs - mean acf_sim)^2 + w_k (k_obs - mean k_sim)^2; +inf when no path was usable.
    double objective(const AcfVector& obs_acf, double obs_kurtosis, double w_k) const {
        if (obs_acf.values.size() != acf_sum_.size()) throw ConfigError("objective: ACF length mismatch");
        if (used_ == 0) return std::numeric_limits<double>::infinity();
        const auto sim = mean_acf();
        double j = 0.0;
        for (std::size_t i = 0; i < sim.size(); ++i) {
            const double d = obs_acf.values[i] - sim[i];
            j += d * d;
        }
        const double dk = obs_kurtosis - mean_kurtosis();
        return j + w_k * dk * dk;
    }

private:
    std::vector<double> acf_sum_;
    double kurtosis_sum_ = 0.0;
    std::size_t used_ = 0;
    std::size_t skipped_ = 0;
};

struct ObjectiveValue {
    double value = 0.0;
    std::size_t skipped_paths = 0;
};

inline ObjectiveValue objective(const AcfVector& obs_acf, double obs_kurtosis, const PathEnsemble& ensemble,
                                double w_k) {
    if (ensemble.paths.empty()) throw ConfigError("objective: empty ensemble");
    EnsembleMoments acc(obs_acf.max_lag);
    for (const auto& p : ensemble.paths) acc.add(p.growth);
    return {acc.objective(obs_acf, obs_kurtosis, w_k), acc.skipped()};
}

struct GridSpec {
    std::vector<double> epsilons{1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3, 1e-2, 2.5e-2};
    std::vector<double> lambdas{10, 25, 40, 55, 70, 85, 100, 130, 160};
    std::size_t paths_per_point = 200;
    std::size_t horizon = 2766;
    double w_k = 0.20;
    std::size_t max_lag = 252;

    void validate() const {
        auto check_axis = [](const std::vector<double>& axis, const char* name) {
            if (axis.empty()) throw ConfigError(std::string("grid.") + name + " must be nonempty");
            for (std::size_t i = 0; i < axis.size(); ++i) {
                if (!(axis[i] > 0.0)) throw ConfigError(std::string("grid.") + name + " values must be positive");
                if (i > 0 && !(axis[i] > axis[i - 1]))
                    throw ConfigError(std::string("grid.") + name + " must be strictly increasing");
            }
        };
        check_axis(epsilons, "epsilons");
        check_axis(lambdas, "lambdas");
        if (paths_per_point < 1) throw ConfigError("grid.paths_per_point must be >= 1");
        if (horizon <= max_lag) throw ConfigError("grid.horizon must exceed grid.max_lag");
        if (!(w_k >= 0.0)) throw ConfigError("grid.w_k must be nonnegative");
    }
};

struct GridResult {
    std::vector<double> epsilons;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> surface;  ///< surface[i][j] = J(epsilons[i], lambdas[j])
    std::vector<std::vector<std::size_t>> skipped_paths;
    std::size_t best_epsilon_index = 0;
    std::size_t best_lambda_index = 0;

    double best_epsilon() const { return epsilons[best_epsilon_index]; }
    double best_lambda() const { return lambdas[best_lambda_index]; }
    double best_value() const { return surface[best_epsilon_index][best_lambda_index]; }

    bool epsilon_at_lower() const { return best_epsilon_index == 0; }
    bool epsilon_at_upper() const { return best_epsilon_index + 1 == epsilons.size(); }
    bool lambda_at_lower() const { return best_lambda_index == 0; }
    bool lambda_at_upper() const { return best_lambda_index + 1 == lambdas.size(); }
};

/// Evaluates one grid cell; receives (epsilon, lambda, epsilon index, lambda
/// index) and reports the objective and the number of skipped paths.
using CellEvaluator = std::function<ObjectiveValue(double, double, std::size_t, std::size_t)>;

/// Scan the full grid with an arbitrary cell evaluator. The argmin prefers the
/// smallest epsilon and then the smallest lambda on ties.
inline GridResult grid_search(const std::vector<double>& epsilons, const std::vector<double>& lambdas,
                              const CellEvaluator& evaluate, unsigned workers = 0) {
    GridResult r;
    r.epsilons = epsilons;
    r.lambdas = lambdas;
    const std::size_t ne = epsilons.size(), nl = lambdas.size();
    if (ne == 0 || nl == 0) throw ConfigError("grid_search: empty grid axis");
    r.surface.assign(ne, std::vector<double>(nl, 0.0));
    r.skipped_paths.assign(ne, std::vector<std::size_t>(nl, 0));
    numeric::parallel_for(ne * nl, workers, [&](std::size_t cell) {
        const std::size_t i = cell / nl, j = cell % nl;
        const auto v = evaluate(epsilons[i], lambdas[j], i, j);
        r.surface[i][j] = v.value;
        r.skipped_paths[i][j] = v.skipped_paths;
    });
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = 0; j < nl; ++j)
            if (!found || r.surface[i][j] < best) {
                best = r.surface[i][j];
                r.best_epsilon_index = i;
                r.best_lambda_index = j;
                found = true;
            }
    return r;
}

/// Simulation-backed grid search. Cell (i, j) path p draws from the stream
/// derived from (seed, i, j, p). `jump_template` supplies n_tail and p_neg.
inline GridResult grid_search(const HmmModel& model, const GrowthSeries& observed, const GridSpec& spec,
                              std::uint64_t seed, const JumpConfig& jump_template = {}, unsigned workers = 0) {
    spec.validate();
    const auto obs_acf = sample_acf(absolute_values(observed.values), spec.max_lag);
    const double obs_kurtosis = numeric::excess_kurtosis(observed.values);
    const ChainSampler chain(model);
    JumpConfig base = jump_template;
    base.enabled = true;
    base.validate(model.n_states());

    auto evaluate = [&](double eps, double lambda, std::size_t i, std::size_t j) {
        JumpConfig jump = base;
        jump.epsilon = eps;
        jump.lambda = lambda;
        EnsembleMoments acc(spec.max_lag);
        for (std::size_t p = 0; p < spec.paths_per_point; ++p) {
            auto rng = numeric::make_stream(seed, {i, j, p});
            const auto sim = simulate_states(chain, jump, spec.horizon, rng);
            acc.add(decode_growth(sim.states, model.emissions, rng));
        }
        return ObjectiveValue{acc.objective(obs_acf, obs_kurtosis, spec.w_k), acc.skipped()};
    };
    return grid_search(spec.epsilons, spec.lambdas, evaluate, workers);
}

inline void write_grid_csv(std::ostream& out, const GridResult& r) {
    out << "epsilon,lambda,J\n";
    char buf[96];
    for (std::size_t i = 0; i < r.epsilons.size(); ++i)
        for (std::size_t j = 0; j < r.lambdas.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.epsilons[i], r.lambdas[j], r.surface[i][j]);
            out << buf;
        }
}

inline nlohmann::json best_point_json(const GridResult& r) {
    return {{"epsilon", r.best_epsilon()},
            {"lambda", r.best_lambda()},
            {"J", r.best_value()},
            {"epsilon_index", r.best_epsilon_index},
            {"lambda_index", r.best_lambda_index},
            {"boundary",
             {{"epsilon_lower", r.epsilon_at_lower()},
              {"epsilon_upper", r.epsilon_at_upper()},
              {"lambda_lower", r.lambda_at_lower()},
              {"lambda_upper", r.lambda_at_upper()}}}};
}

} // namespace qhmm
