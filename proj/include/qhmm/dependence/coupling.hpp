#pragma once

#include "qhmm/dependence/bivariate.hpp"
#include "qhmm/dependence/elliptical.hpp"
#include "qhmm/dependence/vine.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"
#include "qhmm/simulate.hpp"
#include "qhmm/validate.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace qhmm::dependence {

using DependenceModel = std::variant<EllipticalCopula, CVine>;

inline Eigen::MatrixXd sample(const DependenceModel& m, std::size_t t, numeric::Rng& rng) {
    return std::visit([&](const auto& c) { return sample(c, t, rng); }, m);
}

inline std::size_t dim(const DependenceModel& m) {
    return std::visit([](const auto& c) { return static_cast<std::size_t>(c.dim()); }, m);
}

/// Time indices sorted by u ascending; equal u keep time order.
inline std::vector<std::size_t> rank_order(std::span<const double> u) {
    std::vector<std::size_t> idx(u.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
    return idx;
}

/// Permute one path of each asset so its ranks follow the matching column of u
/// (t x d). The multiset of every path is unchanged. States, when present, move
/// with their values.
inline std::vector<SimPath> rank_reorder(const std::vector<const SimPath*>& paths, const Eigen::MatrixXd& u) {
    if (static_cast<Eigen::Index>(paths.size()) != u.cols())
        throw DataError("rank_reorder: " + std::to_string(paths.size()) + " assets but " + std::to_string(u.cols()) +
                        " copula columns");
    std::vector<SimPath> out(paths.size());
    for (std::size_t a = 0; a < paths.size(); ++a) {
        const auto& src = *paths[a];
        const std::size_t t = src.growth.size();
        if (static_cast<Eigen::Index>(t) != u.rows())
            throw DataError("rank_reorder: path length " + std::to_string(t) + " != copula rows " + std::to_string(u.rows()));
        std::vector<std::size_t> by_value(t);
        std::iota(by_value.begin(), by_value.end(), 0);
        std::stable_sort(by_value.begin(), by_value.end(),
                         [&](std::size_t i, std::size_t j) { return src.growth[i] < src.growth[j]; });
        const Eigen::VectorXd col = u.col(static_cast<Eigen::Index>(a));
        const auto target = rank_order(std::span<const double>(col.data(), t));
        auto& dst = out[a];
        dst.growth.resize(t);
        if (!src.states.empty()) dst.states.resize(t);
        for (std::size_t k = 0; k < t; ++k) {
            dst.growth[target[k]] = src.growth[by_value[k]];
            if (!src.states.empty()) dst.states[target[k]] = src.states[by_value[k]];
        }
    }
    return out;
}

/// Couple independently simulated per-asset ensembles path by path. Path p uses
/// copula stream (seed, {p}). Jump episodes are dropped since reordering
/// breaks their contiguity.
inline std::vector<PathEnsemble> couple_ensembles(const DependenceModel& model, const std::vector<PathEnsemble>& assets,
                                                  std::uint64_t seed, unsigned workers = 0) {
    if (assets.size() != dim(model))
        throw DataError("couple_ensembles: model has " + std::to_string(dim(model)) + " assets, got " +
                        std::to_string(assets.size()));
    const std::size_t p = assets.front().size();
    for (const auto& a : assets)
        if (a.size() != p) throw DataError("couple_ensembles: ensembles have different path counts");
    std::vector<PathEnsemble> out(assets.size());
    for (std::size_t a = 0; a < assets.size(); ++a) {
        out[a].horizon = assets[a].horizon;
        out[a].seed = seed;
        out[a].model_id = assets[a].model_id + "|coupled";
        out[a].paths.resize(p);
    }
    numeric::parallel_for(p, workers, [&](std::size_t i) {
        std::vector<const SimPath*> row;
        for (const auto& a : assets) row.push_back(&a.paths[i]);
        auto rng = numeric::make_stream(seed, {i});
        const auto u = sample(model, row.front()->growth.size(), rng);
        auto coupled = rank_reorder(row, u);
        for (std::size_t a = 0; a < assets.size(); ++a) out[a].paths[i] = std::move(coupled[a]);
    });
    return out;
}

// --- correlation reproduction ---------------------------------------------------

struct DependenceReport {
    std::vector<std::string> tickers;
    Eigen::MatrixXd observed_corr;
    Eigen::MatrixXd simulated_corr;  ///< mean over paths
    double frobenius_error = 0.0;
    double frobenius_se = 0.0;       ///< path bootstrap
    double pairwise_corr_mae = 0.0;
    std::map<std::string, Estimate> per_asset_ks_pass;  ///< percent
};

inline Eigen::MatrixXd correlation_matrix(const std::vector<std::span<const double>>& cols) {
    const auto d = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j)
            c(i, j) = c(j, i) = numeric::pearson(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    return c;
}

namespace detail {

inline double upper_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    return std::sqrt(s);
}

} // namespace detail

/// observed: n x d growth columns; simulated: one ensemble per asset, paths
/// aligned by index. Paths are trimmed to n for the KS comparison.
inline DependenceReport correlation_metrics(const Eigen::MatrixXd& observed, const std::vector<PathEnsemble>& simulated,
                                            const std::vector<std::string>& tickers, double alpha = 0.05,
                                            std::size_t bootstrap_b = 200, std::uint64_t bootstrap_seed = 0,
                                            unsigned workers = 0) {
    const auto d = static_cast<std::size_t>(observed.cols());
    if (d < 2) throw DataError("correlation_metrics: need at least 2 assets");
    if (simulated.size() != d || tickers.size() != d)
        throw DataError("correlation_metrics: asset count mismatch");
    const std::size_t p = simulated.front().size();
    if (p == 0) throw DataError("correlation_metrics: empty ensemble");
    for (const auto& e : simulated)
        if (e.size() != p) throw DataError("correlation_metrics: ensembles have different path counts");

    std::vector<Eigen::VectorXd> obs_cols(d);
    std::vector<std::span<const double>> obs_spans;
    for (std::size_t a = 0; a < d; ++a) {
        obs_cols[a] = observed.col(static_cast<Eigen::Index>(a));
        obs_spans.emplace_back(obs_cols[a].data(), static_cast<std::size_t>(obs_cols[a].size()));
    }
    DependenceReport r;
    r.tickers = tickers;
    r.observed_corr = correlation_matrix(obs_spans);

    std::vector<Eigen::MatrixXd> per_path(p);
    std::vector<std::vector<char>> ks_pass(d, std::vector<char>(p, 0));
    const std::size_t n = static_cast<std::size_t>(observed.rows());
    numeric::parallel_for(p, workers, [&](std::size_t i) {
        std::vector<std::span<const double>> cols;
        for (std::size_t a = 0; a < d; ++a) cols.emplace_back(simulated[a].paths[i].growth);
        per_path[i] = correlation_matrix(cols);
        for (std::size_t a = 0; a < d; ++a) {
            const auto& g = simulated[a].paths[i].growth;
            const std::span<const double> trimmed(g.data(), std::min(n, g.size()));
            ks_pass[a][i] = ks_two_sample(obs_spans[a], trimmed).p_value >= alpha ? 1 : 0;
        }
    });

    r.simulated_corr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (const auto& c : per_path) r.simulated_corr += c;
    r.simulated_corr /= static_cast<double>(p);
    r.frobenius_error = detail::upper_frobenius(r.observed_corr, r.simulated_corr);
    double mae = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j, ++pairs)
            mae += std::abs(r.observed_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                            r.simulated_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    r.pairwise_corr_mae = mae / static_cast<double>(pairs);

    if (bootstrap_b > 1 && p > 1) {
        std::vector<double> reps(bootstrap_b);
        for (std::size_t b = 0; b < bootstrap_b; ++b) {
            auto rng = numeric::make_stream(bootstrap_seed, {b});
            std::uniform_int_distribution<std::size_t> pick(0, p - 1);
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r.simulated_corr.rows(), r.simulated_corr.cols());
            for (std::size_t k = 0; k < p; ++k) m += per_path[pick(rng)];
            reps[b] = detail::upper_frobenius(r.observed_corr, m / static_cast<double>(p));
        }
        r.frobenius_se = numeric::stddev(reps);
    }

    for (std::size_t a = 0; a < d; ++a) {
        const double k = static_cast<double>(std::count(ks_pass[a].begin(), ks_pass[a].end(), 1));
        const double rate = k / static_cast<double>(p);
        r.per_asset_ks_pass[tickers[a]] = {100.0 * rate, 100.0 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(p))};
    }
    return r;
}

// --- JSON ---------------------------------------------------------------------

namespace detail {

inline nlohmann::json dof_json(double nu) {
    if (std::isnan(nu)) return nullptr;
    if (std::isinf(nu)) return "inf";
    return nu;
}

inline double dof_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw ConfigError("invalid nu value '" + j.get<std::string>() + "'");
        return std::numeric_limits<double>::infinity();
    }
    return j.get<double>();
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ConfigError("matrix in JSON must be square");
        for (std::size_t k = 0; k < rows.size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return m;
}

} // namespace detail

inline nlohmann::json to_json(const BivariateCopula& c) {
    return {{"family", to_string(c.family)}, {"theta", c.theta}, {"nu", detail::dof_json(c.nu)},
            {"log_lik", c.log_lik}, {"aic", c.aic}, {"independence", c.independence}};
}

inline BivariateCopula bivariate_from_json(const nlohmann::json& j) {
    BivariateCopula c;
    c.family = parse_family(j.at("family").get<std::string>());
    c.theta = j.at("theta").get<double>();
    c.nu = detail::dof_from_json(j.at("nu"));
    c.log_lik = j.value("log_lik", 0.0);
    c.aic = j.value("aic", 0.0);
    c.independence = j.value("independence", false);
    return c;
}

inline nlohmann::json to_json(const DependenceModel& m) {
    return std::visit(
        [](const auto& c) -> nlohmann::json {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, EllipticalCopula>) {
                return {{"type", to_string(c.kind)}, {"sigma", detail::matrix_json(c.sigma)},
                        {"nu", detail::dof_json(c.nu)}, {"log_lik", c.log_lik}, {"repair_delta", c.repair_delta},
                        {"warnings", c.warnings}};
            } else {
                nlohmann::json trees = nlohmann::json::array();
                for (const auto& tree : c.trees) {
                    nlohmann::json edges = nlohmann::json::array();
                    for (const auto& e : tree)
                        edges.push_back({{"root", e.root}, {"other", e.other}, {"given", e.given},
                                         {"copula", to_json(e.copula)}});
                    trees.push_back(edges);
                }
                return {{"type", "vine"}, {"order", c.order}, {"trees", trees}};
            }
        },
        m);
}

inline DependenceModel dependence_model_from_json(const nlohmann::json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "vine") {
        CVine v;
        v.order = j.at("order").get<std::vector<std::size_t>>();
        for (const auto& tree : j.at("trees")) {
            std::vector<VineEdge> edges;
            for (const auto& e : tree)
                edges.push_back({e.at("root").get<std::size_t>(), e.at("other").get<std::size_t>(),
                                 e.at("given").get<std::vector<std::size_t>>(), bivariate_from_json(e.at("copula"))});
            v.trees.push_back(std::move(edges));
        }
        if (v.n_edges() != v.dim() * (v.dim() - 1) / 2) throw ConfigError("vine JSON: wrong number of edges");
        return v;
    }
    EllipticalKind kind;
    if (type == "gaussian")
        kind = EllipticalKind::gaussian;
    else if (type == "student_t")
        kind = EllipticalKind::student_t;
    else
        throw ConfigError("unknown dependence model type '" + type + "'");
    auto c = make_elliptical(kind, detail::matrix_from_json(j.at("sigma")), detail::dof_from_json(j.at("nu")));
    c.log_lik = j.value("log_lik", 0.0);
    c.repair_delta = j.value("repair_delta", 0.0);
    c.warnings = j.value("warnings", std::vector<std::string>{});
    return c;
}

inline nlohmann::json to_json(const DependenceReport& r) {
    nlohmann::json ks = nlohmann::json::object();
    for (const auto& [t, e] : r.per_asset_ks_pass) ks[t] = to_json(e);
    return {{"tickers", r.tickers},
            {"observed_corr", detail::matrix_json(r.observed_corr)},
            {"simulated_corr", detail::matrix_json(r.simulated_corr)},
            {"frobenius_error", {{"value", r.frobenius_error}, {"se", r.frobenius_se}}},
            {"pairwise_corr_mae", r.pairwise_corr_mae},
            {"per_asset_ks_pass_pct", ks}};
}

} // namespace qhmm::dependence
