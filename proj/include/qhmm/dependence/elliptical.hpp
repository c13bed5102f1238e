#pragma once

#include "qhmm/dependence/bivariate.hpp"
#include "qhmm/dependence/rank.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/distributions.hpp"
#include "qhmm/numeric/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace qhmm::dependence {

enum class EllipticalKind { gaussian, student_t };

inline std::string to_string(EllipticalKind k) { return k == EllipticalKind::gaussian ? "gaussian" : "student_t"; }

struct EllipticalCopula {
    EllipticalKind kind = EllipticalKind::gaussian;
    Eigen::MatrixXd sigma;
    double nu = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cholesky;  ///< lower triangular, sigma = L L^T
    double log_lik = 0.0;
    double repair_delta = 0.0;  ///< max |entry change| made by PSD repair, 0 if none
    std::vector<std::string> warnings;

    Eigen::Index dim() const noexcept { return sigma.rows(); }
};

inline constexpr double psd_eigen_floor = 1e-10;
inline constexpr double psd_max_repair = 0.05;

struct PsdRepair {
    Eigen::MatrixXd matrix;
    double delta = 0.0;
};

/// Nearest-PSD correlation matrix by eigenvalue clipping and diagonal
/// renormalization. Throws NumericError if any entry moves more than 0.05.
inline PsdRepair repair_correlation(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw NumericError("repair_correlation: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() >= psd_eigen_floor) return {s, 0.0};
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(psd_eigen_floor);
    Eigen::MatrixXd a = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = a.diagonal().cwiseSqrt().cwiseInverse();
    a = d.asDiagonal() * a * d.asDiagonal();
    a = 0.5 * (a + a.transpose());
    a.diagonal().setOnes();
    const double delta = (a - s).cwiseAbs().maxCoeff();
    if (delta > psd_max_repair)
        throw NumericError("correlation matrix repair moved an entry by " + std::to_string(delta) +
                           " (> 0.05); data inconsistent with an elliptical copula");
    return {a, delta};
}

/// sin(pi tau / 2) correlation matrix from pairwise Kendall tau, clamped to
/// |rho| <= 1 - 1e-6 and repaired to PSD.
inline PsdRepair tau_correlation(const Eigen::MatrixXd& u) {
    const Eigen::MatrixXd tau = kendall_matrix(u);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(u.cols(), u.cols());
    for (Eigen::Index i = 0; i < u.cols(); ++i)
        for (Eigen::Index j = i + 1; j < u.cols(); ++j)
            s(i, j) = s(j, i) = std::clamp(std::sin(std::numbers::pi * tau(i, j) / 2.0), -1.0 + rho_clamp, 1.0 - rho_clamp);
    return repair_correlation(s);
}

namespace detail {

inline Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& s) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw NumericError("cholesky factorization of the correlation matrix failed");
    return llt.matrixL();
}

inline double log_det_from_cholesky(const Eigen::MatrixXd& l) {
    return 2.0 * l.diagonal().array().log().sum();
}

inline void require_copula_sample(const Eigen::MatrixXd& u) {
    if (u.cols() < 2) throw DataError("copula fit: need at least 2 assets");
    if (u.rows() < static_cast<Eigen::Index>(min_copula_sample))
        throw DataError("copula fit: need at least " + std::to_string(min_copula_sample) + " observations");
    if (!((u.array() > 0.0).all() && (u.array() < 1.0).all()))
        throw DataError("copula fit: uniforms must lie in (0,1)");
}

} // namespace detail

/// Sum of multivariate t copula log-densities; nu = inf gives the gaussian copula.
inline double elliptical_log_likelihood(const Eigen::MatrixXd& u, const Eigen::MatrixXd& chol, double nu) {
    const Eigen::Index n = u.rows(), d = u.cols();
    const double log_det = detail::log_det_from_cholesky(chol);
    const bool gauss = numeric::is_gaussian_dof(nu);
    const double dd = static_cast<double>(d);
    const double constant = gauss ? 0.0
                                  : numeric::log_gamma((nu + dd) / 2.0) + (dd - 1.0) * numeric::log_gamma(nu / 2.0) -
                                        dd * numeric::log_gamma((nu + 1.0) / 2.0);
    double ll = 0.0;
    Eigen::VectorXd x(d);
    for (Eigen::Index t = 0; t < n; ++t) {
        double marg = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            x(j) = gauss ? numeric::norm_quantile(u(t, j)) : numeric::t_quantile(u(t, j), nu);
            marg += gauss ? x(j) * x(j) : std::log1p(x(j) * x(j) / nu);
        }
        const double q = chol.triangularView<Eigen::Lower>().solve(x).squaredNorm();
        if (gauss)
            ll += -0.5 * log_det - 0.5 * (q - marg);
        else
            ll += constant - 0.5 * log_det - (nu + dd) / 2.0 * std::log1p(q / nu) + (nu + 1.0) / 2.0 * marg;
    }
    return ll;
}

inline EllipticalCopula make_elliptical(EllipticalKind kind, const Eigen::MatrixXd& sigma, double nu) {
    if (sigma.rows() != sigma.cols() || sigma.rows() < 2) throw ConfigError("elliptical copula: sigma must be d x d, d >= 2");
    if (kind == EllipticalKind::student_t && !(nu > 2.0)) throw ConfigError("student_t copula: nu must exceed 2");
    EllipticalCopula c;
    c.kind = kind;
    c.sigma = sigma;
    c.nu = kind == EllipticalKind::gaussian ? std::numeric_limits<double>::infinity() : nu;
    c.cholesky = detail::lower_cholesky(sigma);
    return c;
}

inline EllipticalCopula fit_gaussian_copula(const Eigen::MatrixXd& u) {
    detail::require_copula_sample(u);
    const auto rep = tau_correlation(u);
    auto c = make_elliptical(EllipticalKind::gaussian, rep.matrix, std::numeric_limits<double>::infinity());
    c.repair_delta = rep.delta;
    if (rep.delta > 0) c.warnings.push_back("correlation matrix repaired to PSD, max delta " + std::to_string(rep.delta));
    c.log_lik = elliptical_log_likelihood(u, c.cholesky, c.nu);
    return c;
}

/// Sigma from Kendall tau; nu by profile likelihood over the grid.
inline EllipticalCopula fit_t_copula(const Eigen::MatrixXd& u) {
    detail::require_copula_sample(u);
    const auto rep = tau_correlation(u);
    const Eigen::MatrixXd chol = detail::lower_cholesky(rep.matrix);
    double best_nu = t_dof_grid.front();
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double nu : t_dof_grid) {
        const double ll = elliptical_log_likelihood(u, chol, nu);
        if (ll > best_ll) {
            best_ll = ll;
            best_nu = nu;
        }
    }
    auto c = make_elliptical(EllipticalKind::student_t, rep.matrix, best_nu);
    c.repair_delta = rep.delta;
    if (rep.delta > 0) c.warnings.push_back("correlation matrix repaired to PSD, max delta " + std::to_string(rep.delta));
    c.log_lik = best_ll;
    return c;
}

/// t x d matrix of copula uniforms.
inline Eigen::MatrixXd sample(const EllipticalCopula& c, std::size_t t, numeric::Rng& rng) {
    const Eigen::Index d = c.dim();
    const bool gauss = numeric::is_gaussian_dof(c.nu);
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi2(gauss ? 1.0 : c.nu);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t), d);
    Eigen::VectorXd z(d);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(t); ++r) {
        for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
        Eigen::VectorXd x = c.cholesky.triangularView<Eigen::Lower>() * z;
        if (gauss) {
            for (Eigen::Index j = 0; j < d; ++j) out(r, j) = clamp_open_unit(numeric::norm_cdf(x(j)));
        } else {
            const double scale = std::sqrt(c.nu / chi2(rng));
            for (Eigen::Index j = 0; j < d; ++j) out(r, j) = clamp_open_unit(numeric::t_cdf(x(j) * scale, c.nu));
        }
    }
    return out;
}

} // namespace qhmm::dependence
