#pragma once

// Bivariate copula families used as vine edges: densities, h-functions
// (conditional CDFs) and their inverses, Kendall-tau inversion and AIC
// selection.

#include "qhmm/dependence/rank.hpp"
#include "qhmm/error.hpp"
#include "qhmm/numeric/distributions.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qhmm::dependence {

enum class Family { gaussian, student_t, clayton, gumbel, frank };

inline constexpr std::array<Family, 5> all_families{Family::gaussian, Family::student_t, Family::clayton,
                                                    Family::gumbel, Family::frank};

inline std::string to_string(Family f) {
    switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::student_t: return "student_t";
    case Family::clayton: return "clayton";
    case Family::gumbel: return "gumbel";
    case Family::frank: return "frank";
    }
    return "unknown";
}

inline Family parse_family(const std::string& s) {
    for (auto f : all_families)
        if (to_string(f) == s) return f;
    throw ConfigError("unknown copula family '" + s + "'");
}

/// Degrees-of-freedom grid for profile likelihood.
inline constexpr std::array<double, 10> t_dof_grid{2.5, 3, 4, 5, 6, 8, 10, 15, 20, 30};

/// Elliptical correlations are kept inside +-(1 - rho_clamp).
inline constexpr double rho_clamp = 1e-6;

struct BivariateCopula {
    Family family = Family::gaussian;
    double theta = 0.0;  ///< rho for gaussian / student_t, theta otherwise
    double nu = std::numeric_limits<double>::quiet_NaN();
    double log_lik = 0.0;
    double aic = 0.0;
    bool independence = false;  ///< Frank fitted at |tau| < 1e-6, theta set to 0

    int n_params() const noexcept { return family == Family::student_t ? 2 : 1; }
};

// --- scalar helpers -------------------------------------------------------------

inline double clamp_open_unit(double x) {
    constexpr double lo = std::numeric_limits<double>::min();
    static const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(x, lo, hi);
}

inline void require_unit(double u, const char* what) {
    if (!(u > 0.0 && u < 1.0)) throw NumericError(std::string(what) + ": argument must lie in (0,1)");
}

/// Debye function D1(x) = (1/x) int_0^x t / (e^t - 1) dt by adaptive Gauss-Kronrod quadrature.
inline double debye1(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x / 4.0;
    auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    const double integral = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, 0.0, x, 15, 1e-14);
    return integral / x;
}

inline double frank_tau(double theta) {
    if (std::abs(theta) < 1e-6) return 0.0;
    return 1.0 + 4.0 * (debye1(theta) - 1.0) / theta;
}

inline constexpr double frank_theta_bound = 35.0;
inline constexpr double frank_independence_tau = 1e-6;

/// Kendall's tau implied by a copula parameter.
inline double param_to_tau(Family f, double theta) {
    switch (f) {
    case Family::gaussian:
    case Family::student_t: return 2.0 / std::numbers::pi * std::asin(theta);
    case Family::clayton: return theta / (theta + 2.0);
    case Family::gumbel: return 1.0 - 1.0 / theta;
    case Family::frank: return frank_tau(theta);
    }
    return 0.0;
}

/// Invert Kendall's tau to the family parameter. Frank is inverted by bisection
/// on [-35, 35]; |tau| < 1e-6 maps to the independence limit theta = 0.
inline double tau_to_param(Family f, double tau) {
    if (!(tau > -1.0 && tau < 1.0))
        throw NumericError(to_string(f) + ": tau=" + std::to_string(tau) + " outside (-1,1)");
    switch (f) {
    case Family::gaussian:
    case Family::student_t: return std::sin(std::numbers::pi * tau / 2.0);
    case Family::clayton:
        if (!(tau > 0.0)) throw NumericError("clayton: requires tau > 0, got " + std::to_string(tau));
        return 2.0 * tau / (1.0 - tau);
    case Family::gumbel:
        if (!(tau >= 0.0)) throw NumericError("gumbel: requires tau >= 0, got " + std::to_string(tau));
        return 1.0 / (1.0 - tau);
    case Family::frank: {
        if (std::abs(tau) < frank_independence_tau) return 0.0;
        const double lo_tau = frank_tau(-frank_theta_bound), hi_tau = frank_tau(frank_theta_bound);
        if (tau <= lo_tau || tau >= hi_tau)
            throw NumericError("frank: tau=" + std::to_string(tau) + " outside the attainable range for |theta| <= 35");
        // tau(theta) is increasing; search the half of the bracket matching tau's sign
        double lo = tau > 0 ? 1e-6 : -frank_theta_bound;
        double hi = tau > 0 ? frank_theta_bound : -1e-6;
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (frank_tau(mid) < tau ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
    return 0.0;
}

// --- densities ------------------------------------------------------------------

/// log c(u, v) for the given family. Arguments must lie strictly inside (0,1).
inline double log_density(const BivariateCopula& c, double u, double v) {
    require_unit(u, "log_density");
    require_unit(v, "log_density");
    const double th = c.theta;
    switch (c.family) {
    case Family::gaussian: {
        const double x = numeric::norm_quantile(u), y = numeric::norm_quantile(v);
        const double r2 = 1.0 - th * th;
        return -0.5 * std::log(r2) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * r2);
    }
    case Family::student_t: {
        const double nu = c.nu;
        const double x = numeric::t_quantile(u, nu), y = numeric::t_quantile(v, nu);
        const double r2 = 1.0 - th * th;
        const double t3 = -(nu + 2.0) / 2.0 * std::log1p((x * x + y * y - 2.0 * th * x * y) / (nu * r2));
        const double t4 = (nu + 1.0) / 2.0 * (std::log1p(x * x / nu) + std::log1p(y * y / nu));
        return numeric::log_gamma((nu + 2.0) / 2.0) + numeric::log_gamma(nu / 2.0) -
               2.0 * numeric::log_gamma((nu + 1.0) / 2.0) - 0.5 * std::log(r2) + t3 + t4;
    }
    case Family::clayton: {
        if (th == 0.0) return 0.0;
        const double lu = std::log(u), lv = std::log(v);
        // log(u^-th + v^-th - 1) computed stably via expm1
        const double s = std::expm1(-th * lu) + std::expm1(-th * lv) + 1.0;
        return std::log1p(th) - (th + 1.0) * (lu + lv) - (2.0 + 1.0 / th) * std::log(s);
    }
    case Family::gumbel: {
        const double x = -std::log(u), y = -std::log(v);
        const double w = std::pow(x, th) + std::pow(y, th);
        const double a = std::pow(w, 1.0 / th);
        return -a - std::log(u) - std::log(v) + (th - 1.0) * (std::log(x) + std::log(y)) +
               (-2.0 + 1.0 / th) * std::log(w) + std::log(a + th - 1.0);
    }
    case Family::frank: {
        if (th == 0.0) return 0.0;
        const double em = -std::expm1(-th);  // 1 - e^-th
        const double d = em - (-std::expm1(-th * u)) * (-std::expm1(-th * v));
        return std::log(th * em) - th * (u + v) - 2.0 * std::log(std::abs(d));
    }
    }
    return 0.0;
}

// --- h-functions ----------------------------------------------------------------

/// h(u | v) = dC(u, v)/dv, the conditional CDF of U given V = v.
inline double h_function(const BivariateCopula& c, double u, double v) {
    require_unit(u, "h_function");
    require_unit(v, "h_function");
    const double th = c.theta;
    double h = u;
    switch (c.family) {
    case Family::gaussian: {
        const double x = numeric::norm_quantile(u), y = numeric::norm_quantile(v);
        h = numeric::norm_cdf((x - th * y) / std::sqrt(1.0 - th * th));
        break;
    }
    case Family::student_t: {
        const double nu = c.nu;
        const double x = numeric::t_quantile(u, nu), y = numeric::t_quantile(v, nu);
        const double scale = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
        h = numeric::t_cdf((x - th * y) / scale, nu + 1.0);
        break;
    }
    case Family::clayton: {
        if (th == 0.0) break;
        const double s = std::expm1(-th * std::log(u)) + std::expm1(-th * std::log(v)) + 1.0;
        h = std::exp(-(th + 1.0) * std::log(v) - (1.0 + 1.0 / th) * std::log(s));
        break;
    }
    case Family::gumbel: {
        const double x = -std::log(u), y = -std::log(v);
        const double w = std::pow(x, th) + std::pow(y, th);
        const double a = std::pow(w, 1.0 / th);
        // C(u,v) / v * y^(th-1) * w^(1/th - 1)
        h = std::exp(-a - std::log(v) + (th - 1.0) * std::log(y) + (1.0 / th - 1.0) * std::log(w));
        break;
    }
    case Family::frank: {
        if (th == 0.0) break;
        const double eu = std::expm1(-th * u), ev = std::expm1(-th * v), e1 = std::expm1(-th);
        h = (ev + 1.0) * eu / (e1 + eu * ev);
        break;
    }
    }
    return clamp_open_unit(h);
}

/// Solve h(u | v) = w for u. Closed forms for gaussian, student_t, clayton and
/// frank; bisection to machine precision for gumbel.
inline double h_inverse(const BivariateCopula& c, double w, double v) {
    require_unit(w, "h_inverse");
    require_unit(v, "h_inverse");
    const double th = c.theta;
    switch (c.family) {
    case Family::gaussian: {
        const double y = numeric::norm_quantile(v);
        return clamp_open_unit(numeric::norm_cdf(numeric::norm_quantile(w) * std::sqrt(1.0 - th * th) + th * y));
    }
    case Family::student_t: {
        const double nu = c.nu;
        const double y = numeric::t_quantile(v, nu);
        const double scale = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
        return clamp_open_unit(numeric::t_cdf(numeric::t_quantile(w, nu + 1.0) * scale + th * y, nu));
    }
    case Family::clayton: {
        if (th == 0.0) return w;
        // u = ((w v^(th+1))^(-th/(th+1)) + 1 - v^-th)^(-1/th)
        const double lv = std::log(v);
        const double a = std::expm1(-th / (th + 1.0) * (std::log(w) + (th + 1.0) * lv));
        const double b = std::expm1(-th * lv);
        const double s = a - b + 1.0;
        return clamp_open_unit(std::exp(-std::log(s) / th));
    }
    case Family::frank: {
        if (th == 0.0) return w;
        // u = -log(1 + w (e^-th - 1) / (e^-th v - w (e^-th v - 1))) / th
        const double ev = std::exp(-th * v);
        const double e1 = std::expm1(-th);
        const double ratio = w * e1 / (ev - w * (ev - 1.0));
        return clamp_open_unit(-std::log1p(ratio) / th);
    }
    case Family::gumbel: {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (h_function(c, clamp_open_unit(mid), v) < w ? lo : hi) = mid;
        }
        const double u = clamp_open_unit(0.5 * (lo + hi));
        if (std::abs(h_function(c, u, v) - w) > 1e-8)
            throw NumericError("h_inverse(gumbel): bisection did not converge (w=" + std::to_string(w) +
                               ", v=" + std::to_string(v) + ", theta=" + std::to_string(th) + ")");
        return u;
    }
    }
    return w;
}

/// Upper / lower tail dependence of a bivariate family.
inline double t_tail_dependence(double rho, double nu) {
    if (!(rho > -1.0 && rho < 1.0)) throw NumericError("t_tail_dependence: rho must lie in (-1,1)");
    if (!(nu > 0.0)) throw NumericError("t_tail_dependence: nu must be positive");
    if (numeric::is_gaussian_dof(nu)) return 0.0;
    return 2.0 * numeric::t_cdf(-std::sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho)), nu + 1.0);
}

struct TailDependence {
    double lower = 0.0;
    double upper = 0.0;
};

inline TailDependence tail_dependence(const BivariateCopula& c) {
    switch (c.family) {
    case Family::gaussian: return {0.0, 0.0};
    case Family::student_t: {
        const double l = t_tail_dependence(c.theta, c.nu);
        return {l, l};
    }
    case Family::clayton: return {c.theta > 0 ? std::pow(2.0, -1.0 / c.theta) : 0.0, 0.0};
    case Family::gumbel: return {0.0, 2.0 - std::pow(2.0, 1.0 / c.theta)};
    case Family::frank: return {0.0, 0.0};
    }
    return {};
}

// --- fitting --------------------------------------------------------------------

inline double log_likelihood(const BivariateCopula& c, std::span<const double> u, std::span<const double> v) {
    double ll = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) ll += log_density(c, u[i], v[i]);
    return ll;
}

inline constexpr std::size_t min_copula_sample = 30;

/// Fit every family that admits the sample's tau; families whose domain
/// excludes it (e.g. clayton at tau <= 0) are left out.
inline std::vector<BivariateCopula> fit_bivariate_candidates(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DataError("fit_bivariate: length mismatch");
    if (u.size() < min_copula_sample)
        throw DataError("fit_bivariate: need at least " + std::to_string(min_copula_sample) + " observations");
    const double tau = kendall_tau(u, v);
    std::vector<BivariateCopula> out;
    for (auto f : all_families) {
        BivariateCopula c;
        c.family = f;
        try {
            c.theta = tau_to_param(f, tau);
        } catch (const NumericError&) {
            continue;
        }
        if (f == Family::gaussian || f == Family::student_t)
            c.theta = std::clamp(c.theta, -1.0 + rho_clamp, 1.0 - rho_clamp);
        if (f == Family::frank && c.theta == 0.0) c.independence = true;
        if (f == Family::student_t) {
            double best = -std::numeric_limits<double>::infinity();
            for (double nu : t_dof_grid) {
                BivariateCopula trial = c;
                trial.nu = nu;
                const double ll = log_likelihood(trial, u, v);
                if (ll > best) {
                    best = ll;
                    c.nu = nu;
                }
            }
            c.log_lik = best;
        } else {
            c.log_lik = log_likelihood(c, u, v);
        }
        if (!std::isfinite(c.log_lik)) continue;
        c.aic = 2.0 * c.n_params() - 2.0 * c.log_lik;
        out.push_back(c);
    }
    if (out.empty()) throw NumericError("fit_bivariate: every family failed to fit");
    return out;
}

/// Lowest-AIC family (ties keep the earlier family in declaration order).
inline BivariateCopula fit_bivariate_by_aic(std::span<const double> u, std::span<const double> v) {
    const auto candidates = fit_bivariate_candidates(u, v);
    return *std::min_element(candidates.begin(), candidates.end(),
                             [](const BivariateCopula& a, const BivariateCopula& b) { return a.aic < b.aic; });
}

} // namespace qhmm::dependence
