#pragma once

#include "qhmm/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace qhmm::dependence {

/// Average ranks (1-based); tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Pseudo-uniform observations u = rank / (n + 1), column by column.
inline Eigen::MatrixXd pit_transform(const Eigen::MatrixXd& columns) {
    if (columns.rows() < 2) throw DataError("pit_transform: need at least 2 rows");
    Eigen::MatrixXd u(columns.rows(), columns.cols());
    const double denom = static_cast<double>(columns.rows()) + 1.0;
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        const Eigen::VectorXd col = columns.col(c);
        const auto r = average_ranks(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        for (Eigen::Index t = 0; t < columns.rows(); ++t) u(t, c) = r[static_cast<std::size_t>(t)] / denom;
    }
    return u;
}

namespace detail {

inline std::uint64_t tie_pairs(std::span<const double> sorted) {
    std::uint64_t total = 0, run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

// merge sort counting inversions (strict: equal keys are not swapped)
inline std::uint64_t sort_count_swaps(std::vector<double>& a, std::vector<double>& buf, std::size_t lo,
                                      std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t swaps = sort_count_swaps(a, buf, lo, mid) + sort_count_swaps(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            buf[k++] = a[j++];
            swaps += mid - i;
        } else {
            buf[k++] = a[i++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

} // namespace detail

/// Tie-adjusted Kendall tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size() || u.size() < 2) throw DataError("kendall_tau: need equal lengths >= 2");
    const std::size_t n = u.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return u[a] < u[b] || (u[a] == u[b] && v[a] < v[b]);
    });
    std::vector<double> us(n), vs(n);
    for (std::size_t i = 0; i < n; ++i) {
        us[i] = u[idx[i]];
        vs[i] = v[idx[i]];
    }
    const std::uint64_t ties_u = detail::tie_pairs(us);
    std::uint64_t ties_joint = 0, run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && us[i] == us[i - 1] && vs[i] == vs[i - 1]) {
            ++run;
        } else {
            ties_joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    std::vector<double> buf(n);
    const std::uint64_t swaps = detail::sort_count_swaps(vs, buf, 0, n);
    const std::uint64_t ties_v = detail::tie_pairs(vs);
    const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    const double du = n0 - static_cast<double>(ties_u), dv = n0 - static_cast<double>(ties_v);
    if (du <= 0.0 || dv <= 0.0) throw NumericError("kendall_tau: constant column");
    const double s = n0 - static_cast<double>(ties_u) - static_cast<double>(ties_v) + static_cast<double>(ties_joint) -
                     2.0 * static_cast<double>(swaps);
    return s / std::sqrt(du * dv);
}

inline Eigen::MatrixXd kendall_matrix(const Eigen::MatrixXd& u) {
    const Eigen::Index d = u.cols();
    Eigen::MatrixXd tau = Eigen::MatrixXd::Identity(d, d);
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(d));
    for (Eigen::Index c = 0; c < d; ++c) cols[static_cast<std::size_t>(c)].assign(u.col(c).data(), u.col(c).data() + u.rows());
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j)
            tau(i, j) = tau(j, i) = kendall_tau(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    return tau;
}

} // namespace qhmm::dependence
