#pragma once

#include "qhmm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace qhmm::numeric {

inline double mean(std::span<const double> x) {
    if (x.empty()) throw NumericError("mean of empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased (n-1) sample variance.
inline double variance(std::span<const double> x) {
    if (x.size() < 2) throw NumericError("variance needs at least two observations");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Biased central moments m2, m3, m4 (divided by n).
struct CentralMoments {
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
};

inline CentralMoments central_moments(std::span<const double> x) {
    CentralMoments c;
    c.mean = mean(x);
    for (double v : x) {
        const double d = v - c.mean;
        const double d2 = d * d;
        c.m2 += d2;
        c.m3 += d2 * d;
        c.m4 += d2 * d2;
    }
    const double n = static_cast<double>(x.size());
    c.m2 /= n;
    c.m3 /= n;
    c.m4 /= n;
    return c;
}

namespace detail {
inline void require_spread(const CentralMoments& c) {
    // Relative guard: a series that is constant up to rounding has no shape.
    if (!(c.m2 > 1e-300) || c.m2 <= 1e-28 * (c.mean * c.mean))
        throw NumericError("zero variance: higher moments undefined");
}
} // namespace detail

/// Simple standardized third moment m3 / m2^1.5.
inline double skewness(std::span<const double> x) {
    const auto c = central_moments(x);
    detail::require_spread(c);
    return c.m3 / std::pow(c.m2, 1.5);
}

/// Simple standardized fourth moment minus 3.
inline double excess_kurtosis(std::span<const double> x) {
    const auto c = central_moments(x);
    detail::require_spread(c);
    return c.m4 / (c.m2 * c.m2) - 3.0;
}

/// Quantile of an already sorted sample by linear interpolation between order
/// statistics (h = (n-1) p), the "type 7" rule.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw NumericError("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double p) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, p);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        throw NumericError("pearson correlation needs equal lengths >= 2");
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) throw NumericError("pearson correlation of constant series");
    return sab / std::sqrt(saa * sbb);
}

/// Standard error of a sample mean, std/sqrt(n); zero for n < 2.
inline double standard_error(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    return stddev(x) / std::sqrt(static_cast<double>(x.size()));
}

} // namespace qhmm::numeric

namespace qhmm::numeric {

/// Sample autocorrelation for lags 1..max_lag using the overall mean and the
/// lag-0 sum of squares as the common denominator.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    if (max_lag >= x.size()) throw NumericError("autocorrelation: max_lag must be < series length");
    const double m = mean(x);
    std::vector<double> centered(x.size());
    double denom = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        centered[t] = x[t] - m;
        denom += centered[t] * centered[t];
    }
    if (!(denom > 1e-300) || denom <= 1e-28 * m * m * static_cast<double>(x.size()))
        throw NumericError("autocorrelation of a zero-variance series");
    std::vector<double> acf(max_lag);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (std::size_t t = 0; t + lag < x.size(); ++t) s += centered[t] * centered[t + lag];
        acf[lag - 1] = s / denom;
    }
    return acf;
}

} // namespace qhmm::numeric
