#pragma once

// Scalar distribution primitives shared by every module. Thin wrappers over
// Boost.Math so call sites stay free of policy/template noise.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qhmm::numeric {

inline bool is_gaussian_dof(double nu) noexcept { return std::isinf(nu) && nu > 0; }

inline double norm_cdf(double x) {
    return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2);
}

inline double norm_quantile(double p) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double norm_log_pdf(double x) noexcept {
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Student-t CDF; an infinite `nu` collapses to the standard normal.
inline double t_cdf(double x, double nu) {
    if (is_gaussian_dof(nu)) return norm_cdf(x);
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

inline double t_quantile(double p, double nu) {
    if (is_gaussian_dof(nu)) return norm_quantile(p);
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

inline double log_gamma(double x) { return boost::math::lgamma(x); }

/// Upper tail P(X > x) of a chi-square with `dof` degrees of freedom.
inline double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Asymptotic Kolmogorov survival function Q(z) = P(sqrt(n) D > z).
/// Two series are used: the alternating one converges fast for large z, the
/// theta-function form for small z. Both are truncated once terms fall below 1e-12.
inline double kolmogorov_sf(double z) {
    if (z <= 0.0) return 1.0;
    constexpr double tol = 1e-12;
    if (z < 1.0) {
        // 1 - sqrt(2 pi)/z * sum exp(-(2k-1)^2 pi^2 / (8 z^2))
        const double a = std::numbers::pi * std::numbers::pi / (8.0 * z * z);
        double sum = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(-odd * odd * a);
            sum += term;
            if (term < tol) break;
        }
        const double cdf = std::sqrt(2.0 * std::numbers::pi) / z * sum;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * z * z);
        sum += (k % 2 == 1 ? term : -term);
        if (term < tol) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace qhmm::numeric
