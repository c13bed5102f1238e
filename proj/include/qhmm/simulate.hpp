#pragma once

// Synthetic path generation: Markov state simulation with Poisson
// jump-duration episodes forced into the tail states, Student-t decoding of
// states into growth rates, seeded ensembles, and i.i.d. baseline generators.

#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qhmm {

struct JumpConfig {
    double epsilon = 1e-4;
    double lambda = 100.0;
    std::size_t n_tail = 1;
    double p_neg = 0.52;
    bool enabled = true;

    /// Throws ConfigError unless 0 <= eps <= 1, lambda > 0, p_neg in [0,1] and
    /// the two tail sets fit disjointly inside the state space (2 n_tail < N).
    void validate(std::size_t n_states) const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("jump.epsilon must lie in [0,1]");
        if (!(lambda > 0.0)) throw ConfigError("jump.lambda must be positive");
        if (!(p_neg >= 0.0 && p_neg <= 1.0)) throw ConfigError("jump.p_neg must lie in [0,1]");
        if (n_tail < 1) throw ConfigError("jump.n_tail must be >= 1");
        if (2 * n_tail >= n_states)
            throw ConfigError("jump.n_tail=" + std::to_string(n_tail) + " too large for " +
                              std::to_string(n_states) + " states");
    }
};

struct JumpEpisode {
    std::size_t start = 0;   ///< first forced index (0-based)
    std::size_t length = 0;  ///< forced steps actually written (truncated at the horizon)
    std::uint64_t drawn = 0; ///< Poisson duration as sampled
};

struct SimPath {
    StateSequence states;  ///< empty for baseline generators, which have no states
    std::vector<double> growth;
    std::vector<JumpEpisode> jump_episodes;

    bool contains_jump() const noexcept { return !jump_episodes.empty(); }
};

struct PathEnsemble {
    std::vector<SimPath> paths;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    std::string model_id;

    std::size_t size() const noexcept { return paths.size(); }

    double jump_fraction() const {
        if (paths.empty()) return 0.0;
        const auto n = std::count_if(paths.begin(), paths.end(), [](const SimPath& p) { return p.contains_jump(); });
        return static_cast<double>(n) / static_cast<double>(paths.size());
    }

    /// Copy keeping the first `m` steps of every path; episodes are clipped.
    PathEnsemble trimmed(std::size_t m) const {
        PathEnsemble out;
        out.horizon = std::min(m, horizon);
        out.seed = seed;
        out.model_id = model_id;
        out.paths.reserve(paths.size());
        for (const auto& p : paths) {
            SimPath q;
            q.growth.assign(p.growth.begin(), p.growth.begin() + static_cast<std::ptrdiff_t>(out.horizon));
            if (!p.states.empty())
                q.states.assign(p.states.begin(), p.states.begin() + static_cast<std::ptrdiff_t>(out.horizon));
            for (auto e : p.jump_episodes) {
                if (e.start > out.horizon || (e.start == out.horizon && e.length > 0)) continue;
                e.length = std::min(e.length, out.horizon - e.start);
                q.jump_episodes.push_back(e);
            }
            out.paths.push_back(std::move(q));
        }
        return out;
    }
};

struct StateSimulation {
    StateSequence states;
    std::vector<JumpEpisode> episodes;
};

/// Precomputed cumulative transition rows and stationary CDF for fast sampling.
class ChainSampler {
public:
    explicit ChainSampler(const HmmModel& model) : n_(model.n_states()) {
        cumulative_rows_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                acc += model.transitions.rows[i][j];
                cumulative_rows_[i * n_ + j] = acc;
            }
        }
        cumulative_initial_.resize(n_);
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) cumulative_initial_[j] = (acc += model.stationary[j]);
    }

    std::size_t n_states() const noexcept { return n_; }

    State initial(numeric::Rng& rng) const { return pick(cumulative_initial_, rng); }

    State next(State from, numeric::Rng& rng) const {
        return pick(std::span<const double>(cumulative_rows_).subspan(from * n_, n_), rng);
    }

private:
    static State pick(std::span<const double> cdf, numeric::Rng& rng) {
        const double u = numeric::uniform01(rng) * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<State>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    }

    std::size_t n_;
    std::vector<double> cumulative_rows_;
    std::vector<double> cumulative_initial_;
};

/// Markov chain of length m with Poisson jump-duration overrides.
///
/// The first state is drawn from the stationary distribution. At every
/// non-forced step a jump fires with probability epsilon; it draws
/// K ~ Poisson(lambda) and forces the next K states (truncated at m) uniformly
/// into the bottom tail with probability p_neg, else the top tail. K = 0 is
/// logged as a zero-length episode and the step proceeds as a normal Markov
/// transition.
inline StateSimulation simulate_states(const ChainSampler& chain, const JumpConfig& jump, std::size_t m,
                                       numeric::Rng& rng) {
    StateSimulation out;
    if (m == 0) return out;
    const std::size_t n = chain.n_states();
    out.states.resize(m);
    out.states[0] = chain.initial(rng);
    const bool jumps = jump.enabled && jump.epsilon > 0.0;
    std::poisson_distribution<std::uint64_t> duration(jumps ? jump.lambda : 1.0);
    const auto n_tail = static_cast<std::uint64_t>(jump.n_tail);

    std::size_t t = 1;
    while (t < m) {
        if (jumps && numeric::uniform01(rng) < jump.epsilon) {
            const std::uint64_t k = duration(rng);
            JumpEpisode episode{t, 0, k};
            for (std::uint64_t j = 0; j < k && t < m; ++j, ++t) {
                const bool negative = numeric::uniform01(rng) < jump.p_neg;
                const auto offset = static_cast<State>(std::min<std::uint64_t>(
                    static_cast<std::uint64_t>(numeric::uniform01(rng) * static_cast<double>(n_tail)), n_tail - 1));
                out.states[t] = negative ? offset : static_cast<State>(n - n_tail) + offset;
                ++episode.length;
            }
            out.episodes.push_back(episode);
            if (k > 0) continue;
        }
        out.states[t] = chain.next(out.states[t - 1], rng);
        ++t;
    }
    return out;
}

inline StateSimulation simulate_states(const HmmModel& model, const JumpConfig& jump, std::size_t m,
                                       numeric::Rng& rng) {
    if (jump.enabled) jump.validate(model.n_states());
    return simulate_states(ChainSampler(model), jump, m, rng);
}

/// G_t = mu_k + sigma_k Z with Z ~ t(nu), or standard normal when nu is infinite.
inline std::vector<double> decode_growth(std::span<const State> states, const EmissionTable& emissions,
                                         numeric::Rng& rng) {
    std::vector<double> g(states.size());
    const std::size_t n = emissions.mu.size();
    auto emit = [&](auto& dist) {
        for (std::size_t t = 0; t < states.size(); ++t) {
            const State k = states[t];
            if (k >= n) throw DataError("decode_growth: state out of range");
            const double z = dist(rng);
            g[t] = emissions.mu[k] + emissions.sigma[k] * z;
        }
    };
    if (numeric::is_gaussian_dof(emissions.nu)) {
        std::normal_distribution<double> dist;
        emit(dist);
    } else {
        std::student_t_distribution<double> dist(emissions.nu);
        emit(dist);
    }
    return g;
}

/// Path i uses the stream derived from (seed, i); output is independent of
/// the worker count.
inline PathEnsemble simulate_ensemble(const HmmModel& model, const JumpConfig& jump, std::size_t p, std::size_t m,
                                      std::uint64_t seed, unsigned workers = 0) {
    if (p < 1 || m < 1) throw ConfigError("simulate_ensemble: paths and horizon must be >= 1");
    if (jump.enabled) jump.validate(model.n_states());
    const ChainSampler chain(model);
    PathEnsemble ens;
    ens.horizon = m;
    ens.seed = seed;
    ens.model_id = model.id();
    ens.paths.resize(p);
    numeric::parallel_for(p, workers, [&](std::size_t i) {
        auto rng = numeric::make_stream(seed, {i});
        auto sim = simulate_states(chain, jump, m, rng);
        auto& path = ens.paths[i];
        path.growth = decode_growth(sim.states, model.emissions, rng);
        path.states = std::move(sim.states);
        path.jump_episodes = std::move(sim.episodes);
    });
    return ens;
}

enum class BaselineKind { bootstrap, gaussian, laplace };

inline BaselineKind parse_baseline_kind(const std::string& s) {
    if (s == "bootstrap") return BaselineKind::bootstrap;
    if (s == "gaussian") return BaselineKind::gaussian;
    if (s == "laplace") return BaselineKind::laplace;
    throw ConfigError("unknown baseline kind '" + s + "'");
}

inline std::string to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::bootstrap: return "bootstrap";
    case BaselineKind::gaussian: return "gaussian";
    case BaselineKind::laplace: return "laplace";
    }
    return "unknown";
}

/// i.i.d. generators: bootstrap resampling of the training values, or draws
/// from the Gaussian / Laplace maximum-likelihood fits.
inline PathEnsemble baseline_generate(BaselineKind kind, const GrowthSeries& training, std::size_t p, std::size_t m,
                                      std::uint64_t seed, unsigned workers = 0) {
    if (training.size() < 2) throw DataError("baseline_generate: training series needs >= 2 values");
    if (p < 1 || m < 1) throw ConfigError("baseline_generate: paths and horizon must be >= 1");
    const auto& x = training.values;
    const double mean = numeric::mean(x);
    const double mle_sd = numeric::stddev(x) * std::sqrt(static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    const LaplaceFit lap = kind == BaselineKind::laplace ? fit_laplace_mle(x) : LaplaceFit{};

    PathEnsemble ens;
    ens.horizon = m;
    ens.seed = seed;
    ens.model_id = training.ticker + "-" + to_string(kind);
    ens.paths.resize(p);
    numeric::parallel_for(p, workers, [&](std::size_t i) {
        auto rng = numeric::make_stream(seed, {i});
        auto& g = ens.paths[i].growth;
        g.resize(m);
        switch (kind) {
        case BaselineKind::bootstrap: {
            std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
            for (auto& v : g) v = x[pick(rng)];
            break;
        }
        case BaselineKind::gaussian: {
            std::normal_distribution<double> dist(mean, mle_sd);
            for (auto& v : g) v = dist(rng);
            break;
        }
        case BaselineKind::laplace:
            for (auto& v : g) {
                double u = numeric::uniform01(rng);
                while (u == 0.0) u = numeric::uniform01(rng);
                v = laplace_quantile(lap, u);
            }
            break;
        }
    });
    return ens;
}

// --- export -----------------------------------------------------------------

/// Columnar CSV: path_id,t,state,growth with 1-based states (blank when the
/// generator has no states) and growth printed round-trip exact.
inline void write_ensemble_csv(std::ostream& out, const PathEnsemble& ens) {
    out << "path_id,t,state,growth\n";
    char buf[64];
    for (std::size_t i = 0; i < ens.paths.size(); ++i) {
        const auto& p = ens.paths[i];
        for (std::size_t t = 0; t < p.growth.size(); ++t) {
            std::snprintf(buf, sizeof buf, "%.17g", p.growth[t]);
            out << i << ',' << t << ',';
            if (!p.states.empty()) out << (p.states[t] + 1);
            out << ',' << buf << '\n';
        }
    }
}

inline nlohmann::json to_json(const JumpConfig& j) {
    return {{"epsilon", j.epsilon}, {"lambda", j.lambda}, {"n_tail", j.n_tail}, {"p_neg", j.p_neg},
            {"enabled", j.enabled}};
}

inline nlohmann::json ensemble_manifest(const PathEnsemble& ens, const nlohmann::json& config) {
    std::size_t with_jump = 0, episodes = 0, forced = 0;
    for (const auto& p : ens.paths) {
        with_jump += p.contains_jump() ? 1 : 0;
        episodes += p.jump_episodes.size();
        for (const auto& e : p.jump_episodes) forced += e.length;
    }
    return {{"seed", ens.seed},
            {"model_id", ens.model_id},
            {"n_paths", ens.size()},
            {"horizon", ens.horizon},
            {"config", config},
            {"jump_fraction", ens.jump_fraction()},
            {"jump_paths", with_jump},
            {"jump_episodes", episodes},
            {"forced_steps", forced}};
}

} // namespace qhmm
