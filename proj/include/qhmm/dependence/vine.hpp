#pragma once

#include "qhmm/dependence/bivariate.hpp"
#include "qhmm/dependence/rank.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

namespace qhmm::dependence {

struct VineEdge {
    std::size_t root = 0;   ///< conditioning root of this tree (asset index)
    std::size_t other = 0;  ///< paired asset index
    std::vector<std::size_t> given;  ///< earlier roots (asset indices)
    BivariateCopula copula;
};

/// Canonical vine. trees[j] holds the d - 1 - j edges of tree j, whose root is
/// order[j]; edge i of tree j pairs order[j] with order[j + 1 + i].
struct CVine {
    std::vector<std::size_t> order;
    std::vector<std::vector<VineEdge>> trees;

    std::size_t dim() const noexcept { return order.size(); }
    std::size_t n_edges() const noexcept {
        std::size_t n = 0;
        for (const auto& t : trees) n += t.size();
        return n;
    }
};

/// Greedy root order: repeatedly place the unplaced variable with the largest
/// sum of |tau| to the other unplaced variables (lowest index wins ties).
inline std::vector<std::size_t> cvine_order(const Eigen::MatrixXd& tau) {
    const auto d = static_cast<std::size_t>(tau.rows());
    std::vector<std::size_t> order;
    std::vector<bool> placed(d, false);
    while (order.size() < d) {
        std::size_t best = d;
        double best_sum = -1.0;
        for (std::size_t i = 0; i < d; ++i) {
            if (placed[i]) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                if (j != i && !placed[j]) s += std::abs(tau(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            if (s > best_sum) {
                best_sum = s;
                best = i;
            }
        }
        placed[best] = true;
        order.push_back(best);
    }
    return order;
}

/// Build a vine skeleton over `order` with every edge set to `edge`
/// (e.g. gaussian rho = 0 for the independence vine).
inline CVine uniform_cvine(std::vector<std::size_t> order, const BivariateCopula& edge) {
    CVine v;
    v.order = std::move(order);
    const std::size_t d = v.order.size();
    for (std::size_t j = 0; j + 1 < d; ++j) {
        std::vector<VineEdge> tree;
        for (std::size_t i = 0; i + j + 1 < d; ++i)
            tree.push_back({v.order[j], v.order[j + 1 + i], {v.order.begin(), v.order.begin() + static_cast<std::ptrdiff_t>(j)}, edge});
        v.trees.push_back(std::move(tree));
    }
    return v;
}

inline CVine fit_cvine(const Eigen::MatrixXd& u) {
    if (u.cols() < 2) throw DataError("fit_cvine: need at least 2 assets");
    if (u.rows() < static_cast<Eigen::Index>(min_copula_sample))
        throw DataError("fit_cvine: need at least " + std::to_string(min_copula_sample) + " observations");
    const std::size_t d = static_cast<std::size_t>(u.cols());
    CVine v;
    v.order = cvine_order(kendall_matrix(u));

    // level[i] holds pseudo-observations of order[j + i] given order[0..j-1]
    std::vector<std::vector<double>> level(d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto col = u.col(static_cast<Eigen::Index>(v.order[i]));
        level[i].assign(col.data(), col.data() + col.size());
    }
    for (std::size_t j = 0; j + 1 < d; ++j) {
        std::vector<VineEdge> tree;
        std::vector<std::vector<double>> next;
        const auto& root = level[0];
        for (std::size_t i = 1; i < level.size(); ++i) {
            VineEdge e{v.order[j], v.order[j + i], {v.order.begin(), v.order.begin() + static_cast<std::ptrdiff_t>(j)},
                       fit_bivariate_by_aic(level[i], root)};
            if (j + 2 < d) {
                std::vector<double> h(root.size());
                for (std::size_t t = 0; t < root.size(); ++t) h[t] = h_function(e.copula, level[i][t], root[t]);
                next.push_back(std::move(h));
            }
            tree.push_back(std::move(e));
        }
        v.trees.push_back(std::move(tree));
        level = std::move(next);
    }
    return v;
}

/// t x d matrix of vine copula uniforms (columns in asset order).
inline Eigen::MatrixXd sample(const CVine& vine, std::size_t t, numeric::Rng& rng) {
    const std::size_t d = vine.dim();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
    // v[i][j]: variable i of the order conditioned on order[0..j-1]
    std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            double x = clamp_open_unit(numeric::uniform01(rng));
            for (std::size_t k = i; k-- > 0;) x = h_inverse(vine.trees[k][i - k - 1].copula, x, v[k][k]);
            v[i][0] = x;
            for (std::size_t j = 0; j < i && i + 1 < d; ++j)
                v[i][j + 1] = h_function(vine.trees[j][i - j - 1].copula, v[i][j], v[j][j]);
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(vine.order[i])) = x;
        }
    }
    return out;
}

} // namespace qhmm::dependence
