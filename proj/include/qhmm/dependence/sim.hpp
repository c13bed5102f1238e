#pragma once

// Single-Index Model: asset = alpha + beta * market + residual.

#include "qhmm/data.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"
#include "qhmm/simulate.hpp"

#include <json.hpp>

#include <random>
#include <span>
#include <string>
#include <vector>

namespace qhmm::dependence {

struct SimFit {
    std::string ticker;
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<double> residuals;
    double r_squared = 0.0;
};

inline SimFit fit_sim(std::span<const double> asset, std::span<const double> market) {
    if (asset.size() != market.size()) throw DataError("fit_sim: asset and market lengths differ");
    if (asset.size() < 3) throw DataError("fit_sim: need at least 3 observations");
    const double mx = numeric::mean(market), my = numeric::mean(asset);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t t = 0; t < asset.size(); ++t) {
        sxx += (market[t] - mx) * (market[t] - mx);
        sxy += (market[t] - mx) * (asset[t] - my);
        syy += (asset[t] - my) * (asset[t] - my);
    }
    if (!(sxx > 0.0)) throw NumericError("fit_sim: market series has zero variance");
    SimFit f;
    f.beta = sxy / sxx;
    f.alpha = my - f.beta * mx;
    f.residuals.resize(asset.size());
    double sse = 0.0;
    for (std::size_t t = 0; t < asset.size(); ++t) {
        f.residuals[t] = asset[t] - f.alpha - f.beta * market[t];
        sse += f.residuals[t] * f.residuals[t];
    }
    f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return f;
}

inline SimFit fit_sim(const GrowthSeries& asset, const GrowthSeries& market) {
    auto f = fit_sim(std::span<const double>(asset.values), std::span<const double>(market.values));
    f.ticker = asset.ticker;
    return f;
}

/// Asset paths driven by market paths with residuals resampled i.i.d. per step.
/// Path p draws from stream (seed, {p}); market jump episodes are carried over.
inline PathEnsemble simulate_sim(const SimFit& fit, const PathEnsemble& market, std::uint64_t seed,
                                 unsigned workers = 0) {
    if (fit.residuals.empty()) throw ConfigError("simulate_sim: empty residual vector");
    PathEnsemble out;
    out.horizon = market.horizon;
    out.seed = seed;
    out.model_id = "sim:" + fit.ticker + "|" + market.model_id;
    out.paths.resize(market.size());
    numeric::parallel_for(market.size(), workers, [&](std::size_t p) {
        auto rng = numeric::make_stream(seed, {p});
        std::uniform_int_distribution<std::size_t> pick(0, fit.residuals.size() - 1);
        const auto& m = market.paths[p];
        SimPath q;
        q.growth.resize(m.growth.size());
        for (std::size_t t = 0; t < m.growth.size(); ++t)
            q.growth[t] = fit.alpha + fit.beta * m.growth[t] + fit.residuals[pick(rng)];
        q.jump_episodes = m.jump_episodes;
        out.paths[p] = std::move(q);
    });
    return out;
}

inline nlohmann::json to_json(const SimFit& f) {
    return {{"ticker", f.ticker}, {"alpha", f.alpha}, {"beta", f.beta}, {"r_squared", f.r_squared},
            {"n_residuals", f.residuals.size()}};
}

} // namespace qhmm::dependence
